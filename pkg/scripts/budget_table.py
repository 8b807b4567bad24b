"""Print the connection and trainable-parameter budgets of the three
architectures at matched sizes, for a 32-channel, 11-class setup."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tdekws.topology import (
    LIF,
    LIFREC,
    TDE,
    NetworkSpec,
    balance_hidden_size,
    connection_count,
    enumerate_tde_pairs,
    trainable_parameter_count,
)


def main() -> None:
    sizes = [int(s) for s in sys.argv[1:]] or [992, 540, 186]
    all_pairs = enumerate_tde_pairs(32)
    print(f"{'tde cells':>10} {'connections':>12} {'arch':>8} "
          f"{'n_l1':>6} {'connections':>12} {'parameters':>11}")
    for n in sizes:
        tde = NetworkSpec(kind=TDE, n_l1=n, n_l0=32, n_l2=11,
                          tde_pairs=tuple(all_pairs[:n]))
        target = connection_count(tde)
        rows = [(TDE, tde)]
        for kind in (LIFREC, LIF):
            m = balance_hidden_size(target, kind)
            rows.append((kind, NetworkSpec(kind=kind, n_l1=m, n_l0=32,
                                           n_l2=11)))
        for kind, spec in rows:
            print(f"{n:>10} {target:>12} {kind:>8} {spec.n_l1:>6} "
                  f"{connection_count(spec):>12} "
                  f"{trainable_parameter_count(spec):>11}")


if __name__ == "__main__":
    main()
