"""Regenerates crates/core/tests/fixtures/bounds.json with mpmath at 50 digits.

Every value is computed from the closed-form product expressions, not from
logarithms, so the fixture is independent of the Rust implementation.
"""
import json
import pathlib

from mpmath import mp, mpf, gamma, pi, sqrt, acos, log

mp.dps = 50


def coverage_ratio(k, d, eps, vol, n):
    return pi ** (mpf(k) / 2) * gamma(mpf(d - k) / 2 + 1) / gamma(mpf(d) / 2 + 1) * mpf(eps) ** k / mpf(vol) * n


def plane_coverage(k, d):
    return pi ** (mpf(k) / 2) * gamma(mpf(d - k) / 2 + 1) / gamma(mpf(d) / 2 + 1) * (sqrt(k) / 2) ** k


def tube_cover_samples(k, d, lo, hi):
    return pi ** (-mpf(k) / 2) * gamma(mpf(d) / 2 + 1) / gamma(mpf(d - k) / 2 + 1) * (mpf(hi) - mpf(lo)) ** k


def sphere_coverage(n, d, eps):
    e = mpf(eps)
    return n * e ** d / ((1 + e) ** d - (1 - e) ** d)


def linear_regions(r1, rch, tau, d):
    return 2 * sqrt(pi) * gamma(mpf(d + 1) / 2) / gamma(mpf(d) / 2) * ((mpf(r1) + mpf(rch)) / (4 * mpf(tau))) ** (mpf(d - 1) / 2)


def segment_count(r1, r2, eps):
    return pi / acos((mpf(r1) + mpf(eps)) / (mpf(r2) - mpf(eps)))


def medial_t_star(delta, w1, w2):
    delta, w1, w2 = mpf(delta), mpf(w1), mpf(w2)
    gap = w2 ** 2 - w1 ** 2
    return (delta ** 2 + gap + 2 * delta * w2) / (1 + gap)


CASES = [
    ("coverage_ratio", dict(k=1, d=2, eps=1, vol=6.283185307179586, n=1000), coverage_ratio),
    ("coverage_ratio", dict(k=2, d=10, eps=0.5, vol=400, n=450), coverage_ratio),
    ("coverage_ratio", dict(k=2, d=502, eps=1, vol=400, n=450), coverage_ratio),
    ("coverage_ratio", dict(k=5, d=1000, eps=0.25, vol=1, n=1000000), coverage_ratio),
    ("plane_coverage", dict(k=2, d=3), plane_coverage),
    ("plane_coverage", dict(k=2, d=100), plane_coverage),
    ("plane_coverage", dict(k=3, d=50), plane_coverage),
    ("tube_cover_samples", dict(k=2, d=3, lo=-10, hi=10), tube_cover_samples),
    ("tube_cover_samples", dict(k=2, d=12, lo=-10, hi=10), tube_cover_samples),
    ("tube_cover_samples", dict(k=2, d=502, lo=-10, hi=10), tube_cover_samples),
    ("tube_cover_samples", dict(k=4, d=9, lo=0, hi=1.5), tube_cover_samples),
    ("sphere_coverage", dict(n=1000, d=2, eps=1), sphere_coverage),
    ("sphere_coverage", dict(n=1000, d=10, eps=0.5), sphere_coverage),
    ("sphere_coverage", dict(n=100000, d=100, eps=0.1), sphere_coverage),
    ("sphere_coverage", dict(n=1, d=500, eps=0.01), sphere_coverage),
    ("linear_regions", dict(r1=1, rch=1, tau=0.5, d=2), linear_regions),
    ("linear_regions", dict(r1=1, rch=1, tau=0.1, d=3), linear_regions),
    ("linear_regions", dict(r1=1, rch=1, tau=0.05, d=50), linear_regions),
    ("linear_regions", dict(r1=2, rch=0.5, tau=0.25, d=11), linear_regions),
    ("segment_count", dict(r1=1, r2=3, eps=0), segment_count),
    ("segment_count", dict(r1=1, r2=3, eps=0.9), segment_count),
    ("segment_count", dict(r1=1, r2=1.1, eps=0.01), segment_count),
    ("medial_t_star", dict(delta=0.5, w1=0.5, w2=0.5), medial_t_star),
    ("medial_t_star", dict(delta=0.25, w1=0.1, w2=0.7), medial_t_star),
    ("medial_t_star", dict(delta=0.0, w1=0.3, w2=0.9), medial_t_star),
]


def main():
    rows = []
    for formula, inputs, fn in CASES:
        v = fn(**inputs)
        rows.append({
            "formula": formula,
            "inputs": inputs,
            "value": mp.nstr(v, 30),
            "log_value": mp.nstr(log(v), 30),
        })
    out = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/bounds.json"
    out.write_text(json.dumps(rows, indent=1) + "\n")
    print(f"wrote {len(rows)} fixtures to {out}")


if __name__ == "__main__":
    main()
