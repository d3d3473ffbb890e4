"""Gallery of the simulated assembler strategies: run each profile over
the 28-step fixture, print its command mix, and check the jump
classifier against the simulator's own ground truth.

Run from the repository root:  python3 demos/04_strategy_gallery.py
"""

from blocknav.fixtures import model_28
from blocknav.simulate import (
    PROFILE_KINDS,
    StrategyProfile,
    classify_jumps,
    confusion_matrix,
    simulate,
)


def main():
    doc = model_28()
    print(f"document: {doc.title!r} ({doc.step_count} steps)")
    print()

    header = (f"{'profile':<18}{'next':>6}{'prev':>6}{'jumps':>7}{'back':>6}"
              f"{'noops':>7}{'visited':>9}  done")
    print(header)
    print("-" * len(header))

    results = {}
    for kind in PROFILE_KINDS:
        profile = StrategyProfile(kind=kind, seed=7, skip_probability=0.8, error_rate=0.2)
        result = simulate(doc, profile)
        results[kind] = result
        m = result.metrics
        print(f"{kind:<18}{m.next_count:>6}{m.previous_count:>6}"
              f"{m.this_one_count:>7}{m.going_back_count:>6}{m.noop_count:>7}"
              f"{m.steps_visited:>9}  {'yes' if m.completed else 'no'}")
    print()

    print("classifier vs simulator ground truth (rows: truth, cols: prediction):")
    for kind in ("SelectiveSkipping", "Debugging", "BlockScanning", "Mixed"):
        result = results[kind]
        if not result.ground_truth:
            print(f"  {kind}: no jumps this seed")
            continue
        predicted = classify_jumps(result.log, doc)
        matrix = confusion_matrix(result.ground_truth, predicted)
        cells = ", ".join(
            f"{truth}->{pred}: {count}" for (truth, pred), count in sorted(matrix.items()))
        print(f"  {kind}: {cells}")
    print()

    print("the same seed always reproduces the same session:")
    again = simulate(doc, StrategyProfile(kind="Mixed", seed=7,
                                          skip_probability=0.8, error_rate=0.2))
    same = [e.to_step for e in again.log] == [e.to_step for e in results["Mixed"].log]
    print(f"  Mixed seed 7 rerun: {'identical log' if same else 'DIVERGED'}")


if __name__ == "__main__":
    main()
