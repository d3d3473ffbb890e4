/**
 * DOM rendering and input wiring.
 *
 * The component is a pure projection of the model: every render reads the
 * current view and rewrites the small dynamic regions. Inputs only ever
 * call controller methods; no handler touches the step display directly,
 * which is what keeps the screen glued to engine state.
 */

import type { PlayerController } from "./controller.js";
import type { PlayerView } from "./state.js";
import type { CommandVariant } from "./types.js";

const KEY_COMMANDS: Record<string, CommandVariant> = {
  n: "next",
  p: "previous",
  g: "going_back",
  o: "overview",
};

const COMMAND_LABELS: Record<CommandVariant, string> = {
  previous: "Previous",
  next: "Next",
  this_one: "This one",
  going_back: "Going back",
  overview: "Overview",
};

export class PlayerUi {
  private readonly refs: Record<string, HTMLElement> = {};
  private pinOverview = false;
  private unsubscribe: () => void = () => undefined;
  private keyHandler: (event: KeyboardEvent) => void = () => undefined;

  constructor(
    readonly root: HTMLElement,
    readonly controller: PlayerController,
  ) {
    this.build();
    this.wire();
    this.unsubscribe = controller.model.subscribe(() => this.render());
    this.render();
  }

  /** Detach the document-level key listener and stop re-rendering. */
  destroy(): void {
    this.unsubscribe();
    this.root.ownerDocument.removeEventListener("keydown", this.keyHandler);
  }

  private build(): void {
    this.root.classList.add("player");
    this.root.innerHTML = `
      <div class="banner" data-role="banner" hidden>
        <span>Connection lost. The controls are paused.</span>
        <button type="button" data-role="reconnect">Reconnect</button>
      </div>
      <header>
        <h1 data-role="title"></h1>
        <span class="session" data-role="session"></span>
      </header>
      <section class="step-panel">
        <div class="step-head">
          <span class="counter" data-role="step-counter"></span>
          <span class="badge" data-role="badge" hidden></span>
          <span class="armed" data-role="armed" hidden>Armed. Show a block.</span>
        </div>
        <p class="caption" data-role="caption"></p>
        <div class="figure" data-role="figure"></div>
        <ul class="blocks" data-role="blocks"></ul>
      </section>
      <section class="controls" data-role="controls">
        <button type="button" data-cmd="previous">Previous</button>
        <button type="button" data-cmd="next">Next</button>
        <button type="button" data-cmd="this_one">This one</button>
        <button type="button" data-cmd="going_back">Going back</button>
        <button type="button" data-cmd="overview">Overview</button>
        <label class="pin"><input type="checkbox" data-role="pin-overview"> keep overview open</label>
      </section>
      <section class="palette-panel">
        <h2>Blocks</h2>
        <div class="palette" data-role="palette"></div>
      </section>
      <section class="overview-panel" data-role="overview-panel" hidden>
        <span data-role="subpart"></span>
        <span data-role="visited-count"></span>
      </section>
      <div class="strip" data-role="strip"></div>
      <div class="notice" data-role="notice" hidden>
        <span data-role="notice-text"></span>
        <button type="button" data-role="retry" hidden>Retry</button>
      </div>
      <div class="last-event" data-role="last-event"></div>
    `;
    for (const el of this.root.querySelectorAll<HTMLElement>("[data-role]")) {
      this.refs[el.dataset["role"] as string] = el;
    }
  }

  private wire(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-cmd]")) {
      button.addEventListener("click", () => {
        this.issue(button.dataset["cmd"] as CommandVariant);
      });
    }
    (this.refs["reconnect"] as HTMLButtonElement).addEventListener("click", () => {
      void this.controller.reconnect().catch(() => undefined);
    });
    (this.refs["retry"] as HTMLButtonElement).addEventListener("click", () => {
      this.controller.model.view.notice?.retry?.();
    });
    const pin = this.refs["pin-overview"] as HTMLInputElement;
    pin.addEventListener("change", () => {
      this.pinOverview = pin.checked;
      this.render();
    });
    this.keyHandler = (event: KeyboardEvent) => {
      const target = event.target as HTMLElement | null;
      if (target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) return;
      const variant = KEY_COMMANDS[event.key.toLowerCase()];
      if (variant) this.issue(variant);
    };
    this.root.ownerDocument.addEventListener("keydown", this.keyHandler);
  }

  private issue(variant: CommandVariant): void {
    if (!this.controller.model.view.connected) return;
    void this.controller.command(variant).catch(() => undefined);
  }

  private show(tagId: string): void {
    if (!this.controller.model.view.connected) return;
    void this.controller.showBlock(tagId).catch(() => undefined);
  }

  private render(): void {
    const view = this.controller.model.view;
    this.renderHeader(view);
    this.renderStep(view);
    this.renderControls(view);
    this.renderPalette(view);
    this.renderOverview(view);
    this.renderNotice(view);
    this.refs["banner"]!.hidden = view.connected;
  }

  private renderHeader(view: PlayerView): void {
    this.refs["title"]!.textContent = view.descriptor?.title ?? "connecting";
    this.refs["session"]!.textContent = view.descriptor
      ? `session ${view.descriptor.session_id}`
      : "";
  }

  private renderStep(view: PlayerView): void {
    const counter = this.refs["step-counter"]!;
    const badge = this.refs["badge"]!;
    const caption = this.refs["caption"]!;
    const figure = this.refs["figure"]!;
    const blocks = this.refs["blocks"]!;
    if (!view.descriptor || !view.detail) {
      counter.textContent = "";
      return;
    }
    counter.textContent = `Step ${view.descriptor.current_step} / ${view.descriptor.total_steps}`;
    const special = view.detail.kind !== "assembly";
    badge.hidden = !special;
    badge.textContent = view.detail.kind === "preview" ? "preview" : "overview page";
    caption.textContent = view.detail.caption;

    figure.textContent = "";
    if (view.detail.imageRef) {
      const img = figure.ownerDocument.createElement("img");
      img.src = view.detail.imageRef;
      img.alt = view.detail.caption;
      figure.appendChild(img);
    } else {
      // synthetic documents carry no art, stand in with colored tiles
      for (const spec of view.detail.blocks) {
        const tile = figure.ownerDocument.createElement("div");
        tile.className = "tile";
        tile.style.background = spec.color || "#999";
        tile.title = spec.label || spec.tag_id;
        figure.appendChild(tile);
      }
    }

    blocks.textContent = "";
    for (const spec of view.detail.blocks) {
      const item = blocks.ownerDocument.createElement("li");
      item.textContent = spec.label ? `${spec.label} (${spec.tag_id})` : spec.tag_id;
      if (spec.asymmetric) item.textContent += ", asymmetric";
      blocks.appendChild(item);
    }

    this.refs["armed"]!.hidden = !view.armed;
  }

  private renderControls(view: PlayerView): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-cmd]")) {
      button.disabled = !view.connected;
      button.textContent = COMMAND_LABELS[button.dataset["cmd"] as CommandVariant];
    }
    const back = this.root.querySelector<HTMLButtonElement>('[data-cmd="going_back"]')!;
    back.classList.toggle("ready", view.returnAnchor !== null);
    if (view.returnAnchor !== null) {
      back.textContent = `Going back (to ${view.returnAnchor})`;
    }
  }

  private renderPalette(view: PlayerView): void {
    const palette = this.refs["palette"]!;
    if (palette.childElementCount !== view.palette.length) {
      palette.textContent = "";
      for (const spec of view.palette) {
        const button = palette.ownerDocument.createElement("button");
        button.type = "button";
        button.dataset["tag"] = spec.tag_id;
        button.innerHTML = `<span class="chip"></span>${spec.label || spec.tag_id}`;
        (button.firstChild as HTMLElement).style.background = spec.color || "#999";
        button.addEventListener("click", () => this.show(spec.tag_id));
        palette.appendChild(button);
      }
    }
    for (const button of palette.querySelectorAll<HTMLButtonElement>("button")) {
      button.disabled = !view.connected;
    }
  }

  private renderOverview(view: PlayerView): void {
    const strip = this.refs["strip"]!;
    const panel = this.refs["overview-panel"]!;
    if (!view.overview) {
      strip.textContent = "";
      panel.hidden = true;
      return;
    }
    if (strip.childElementCount !== view.overview.totalSteps) {
      strip.textContent = "";
      for (let i = 1; i <= view.overview.totalSteps; i++) {
        const box = strip.ownerDocument.createElement("span");
        box.className = "box";
        box.dataset["stepBox"] = String(i);
        strip.appendChild(box);
      }
    }
    for (const box of strip.querySelectorAll<HTMLElement>(".box")) {
      const index = Number(box.dataset["stepBox"]);
      box.classList.toggle("current", index === view.overview.currentStep);
      box.classList.toggle("visited", view.overview.visited.has(index));
    }
    panel.hidden = !(this.pinOverview || view.lastEvent?.command === "overview");
    this.refs["subpart"]!.textContent = view.overview.subpartPath.join(" / ") || "(top level)";
    this.refs["visited-count"]!.textContent =
      `visited ${view.overview.visited.size} of ${view.overview.totalSteps}`;
  }

  private renderNotice(view: PlayerView): void {
    const notice = this.refs["notice"]!;
    notice.hidden = view.notice === null;
    this.refs["notice-text"]!.textContent = view.notice?.text ?? "";
    this.refs["retry"]!.hidden = !view.notice?.retry;
    const last = view.lastEvent;
    this.refs["last-event"]!.textContent = last
      ? `#${last.seq} ${last.command}${last.tag ? `(${last.tag})` : ""} ` +
        `${last.from_step}->${last.to_step}${last.note ? ` [${last.note}]` : ""}`
      : "";
  }
}
