#!/usr/bin/env python3
"""
Quality settings check script for lzkit.

This script runs one transition cell at every integrator preset (low, medium, high) to show:
1. Tighter presets take more steps
2. The measured probability converges as the tolerance shrinks
3. The propagator stays trace preserving at every level
"""

from lzkit.gamma_profile import ConstantGamma
from lzkit.model import LZFamily
from lzkit.propagate import IntegratorConfig
from lzkit.transition import measured_p

G = 1.0
EPSILON = 0.3
GAMMA = ConstantGamma(0.5)
HORIZON = 20.0


def check_quality_level(quality: str):
    """Measure the cell at one quality level."""
    print(f"\n=== Checking quality: {quality} ===")

    cfg = IntegratorConfig.from_quality(quality)
    print(f"Tolerances for {quality}: rtol={cfg.rtol:.0e} atol={cfg.atol:.0e}")

    record = measured_p(LZFamily(G), GAMMA, EPSILON, HORIZON, cfg)
    print(f"p_measured: {record.p_measured:.12f}")
    print(f"Steps: {record.steps_accepted} accepted, {record.wall_time_s:.2f}s")
    print(f"Trace defect: {record.cptp_trace_defect:.2e}")
    return record


def main():
    """Run the cell for all levels and compare against the tightest one."""
    print("lzkit Quality Settings Check")
    print("============================")

    # 品質順に実行
    quality_levels = ["low", "medium", "high"]
    records = {quality: check_quality_level(quality) for quality in quality_levels}

    reference = records["high"].p_measured
    print("\n=== Results ===")
    for quality in quality_levels:
        record = records[quality]
        print(f"- {quality:6s} |p - p_high| = {abs(record.p_measured - reference):.2e} "
              f"({record.steps_accepted} steps)")
    print("\nLook for:")
    print("1. Differences shrinking from low to medium")
    print("2. Step counts growing with the preset")
    print("3. Trace defects near roundoff")


if __name__ == "__main__":
    main()
