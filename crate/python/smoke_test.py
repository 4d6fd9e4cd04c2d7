"""Smoke test for the Python bindings.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/merton_lattice-*.whl
"""

import math
import pathlib
import sys

import merton_lattice as ml

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "docs" / "configs"


def main() -> int:
    failures = [c for c in ml.selftest() if not c[1]]
    assert not failures, failures

    xi = ml.xi_table(2)
    assert len(xi) == 3 and all(len(row) == 2 for row in xi)
    for j in range(2):
        assert abs(sum(row[j] for row in xi)) < 1e-12

    hand = ml.Pricer.from_file(str(CONFIGS / "hand_example.json"))
    assert hand.price() == 0.5, hand.price()

    put = ml.Pricer.from_file(str(CONFIGS / "bs_put_1d.json"))
    european = put.price(n=512, style="european")
    bs = ml.black_scholes("put", 1.0, 1.0, 0.2, 0.05, 1.0)
    assert abs(european - bs) < 1e-3, (european, bs)

    american = put.price(n=128)
    assert american >= european
    mean, stderr = put.lsmc(paths=20000)
    assert math.isfinite(mean) and stderr > 0
    assert abs(mean - american) < 0.01, (mean, american)

    csv = put.converge().splitlines()
    assert csv[0] == "n,value,error,ref,ref_kind,seconds"
    assert csv[-2].startswith("fitted_beta,")

    try:
        ml.Pricer("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("empty config accepted")

    print("smoke test ok: american put", american)
    return 0


if __name__ == "__main__":
    sys.exit(main())
