import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // The round-trip suite boots real relay and session services per file.
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
