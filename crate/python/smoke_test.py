"""Smoke test for the spectral_heat extension module.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import json
import math
import tempfile

import spectral_heat as sh


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    seg = sh.Domain.interval(-0.5, -0.5)
    assert seg.kind == "interval" and seg.dim == 1
    close(seg.eigenvalue(3), 9.0, 1e-14)

    # Chebyshev heat kernel against the cosine series.
    hk = sh.HeatKernel(seg, 80, epsilon=1e-13)
    t, a, b = 0.2, 0.4, 1.3
    x, y = [math.cos(a)], [math.cos(b)]
    ref = 1 / math.pi + (2 / math.pi) * sum(
        math.exp(-k * k * t) * math.cos(k * a) * math.cos(k * b) for k in range(1, 200)
    )
    value, tail = hk.heat_kernel(t, x, y)
    close(value, ref, 1e-10)
    assert tail <= 1e-12
    close(hk.mass_check(0.5, [0.1]), 1.0, 1e-9)

    disk = sh.Domain.ball(2, 0.5)
    basis = sh.Basis(disk, 8)
    assert basis.level_sizes == [k + 1 for k in range(9)]
    assert max(basis.gram_residual()) < 1e-10
    assert max(basis.verify_eigenrelation()) < 1e-8
    again = sh.Basis.from_json(basis.to_json())
    assert again.num_members == basis.num_members

    p = sh.Polynomial(2, [([2, 0], 1.0), ([0, 1], -3.0)])
    close(p([0.5, 0.25]), 0.25 - 0.75, 1e-15)
    assert (p * p).degree == 4

    close(sh.distance(disk, [0.0, 0.0], [0.0, 0.0]), 0.0, 1e-15)
    lift = sh.chart_lift(disk, [0.3, 0.4])
    close(sum(c * c for c in lift), 1.0, 1e-14)
    v, err = sh.volume(disk, [0.0, 0.0], 0.5, seed=7, samples=20000)
    assert v > 0 and err < v

    tri = sh.Domain.simplex([0.5, 0.5, 0.5])
    kt = sh.HeatKernel(tri, 12)
    val, _ = kt.heat_kernel(0.3, [0.2, 0.3], [0.25, 0.25])
    assert val > 0

    close(sh.perturbed_identity_det([1.0, 2.0, 3.0]), 6 * (1 + 1 + 1 / 2 + 1 / 3), 1e-12)

    with tempfile.TemporaryDirectory() as out:
        toml = f'seed = 1\noutput_dir = "{out}"\n[domain]\nkind = "interval"\nalpha = 0.0\nbeta = 0.0\n'
        ran = sh.run_suite(toml, "kernel")
    assert ran and all(ok for _, ok, _ in ran)
    json.loads(ran[0][2])
    print("spectral_heat smoke test: ok")


if __name__ == "__main__":
    main()
