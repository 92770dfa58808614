"""Calibration sweeps: the routing-threshold tradeoff and the attack's
averaging-window tradeoff, printed as small tables.

Run:  python3 demos/threshold_calibration.py
"""

from videocloak import PGDConfig, SurrogateEncoder, SurrogateEncoderConfig, synth
from videocloak.calibrate import grid_search_taus, sweep_window


def main():
    enc = SurrogateEncoder(SurrogateEncoderConfig(seed=42))
    pgd = PGDConfig(rng_seed=42, steps_full=50, steps_continue=12)

    moving = synth.noise_motion(12, 64, 42)
    print("routing thresholds on a moving scene "
          "(lower distance = stronger, higher speedup = cheaper)")
    print(f"{'tau1':>6} {'tau2':>6} {'distance':>9} {'speedup':>8}")
    for t1, t2, dist, speed in grid_search_taus(
        moving, (0.0, 0.06), (0.2, 0.45, 0.8), enc, pgd
    ):
        print(f"{t1:6.2f} {t2:6.2f} {dist:9.4f} {speed:8.2f}")

    static = synth.static(20, 64, 42)
    print("\naveraging window n vs what the attack recovers "
          "(n=1 is the untouched protected baseline)")
    print(f"{'n':>3} {'latent L2':>10} {'mpd':>7}")
    for n, l2, px in sweep_window(static, [1, 3, 5, 7], enc, pgd):
        print(f"{n:3d} {l2:10.4f} {px:7.3f}")


if __name__ == "__main__":
    main()
