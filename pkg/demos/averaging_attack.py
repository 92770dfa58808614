"""Red-team differential: selective pixel averaging strips per-frame
protection but not scene-coherent protection.

Per-frame protection gives every frame an independently randomized target,
so consecutive deltas decorrelate and averaging cancels them. With one
shared target per scene the deltas are (bit-)identical and averaging
changes nothing.

Run:  python3 demos/averaging_attack.py
"""

import numpy as np

from videocloak import (
    AveragingConfig,
    PGDConfig,
    RoutingConfig,
    SurrogateEncoder,
    SurrogateEncoderConfig,
    TargetSpec,
    checkerboard_style,
    protect_video,
    protect_video_naive,
    remove_perturbations,
    synth,
)
from videocloak.metrics import latent_l2, mpd
from videocloak.scenes import partition


def mean_metrics(original, candidate, enc):
    n = len(original)
    l2 = np.mean([latent_l2(original.frames[i], candidate.frames[i], enc) for i in range(n)])
    px = np.mean([mpd(original.frames[i], candidate.frames[i]) for i in range(n)])
    return float(l2), float(px)


def main():
    seq = synth.static(50, 64, 42)
    manifest = partition(seq)
    enc = SurrogateEncoder(SurrogateEncoderConfig(seed=42))
    pgd = PGDConfig(rng_seed=42)
    attack = AveragingConfig(window=5, epsilon_p="auto")

    naive, _ = protect_video_naive(seq, enc, pgd)
    framework = protect_video(
        seq, manifest, enc, pgd, RoutingConfig(),
        TargetSpec(style_image=checkerboard_style(64, 64)),
    ).protected

    for label, protected in (("per-frame", naive), ("scene-coherent", framework)):
        recovered, _ = remove_perturbations(protected, manifest, attack)
        l2_p, mpd_p = mean_metrics(seq, protected, enc)
        l2_r, mpd_r = mean_metrics(seq, recovered, enc)
        print(f"{label:>15}: protected mpd {mpd_p:6.2f}  l2 {l2_p:.3f}   "
              f"after attack mpd {mpd_r:6.2f}  l2 {l2_r:.3f}   "
              f"(mpd drop {(mpd_p - mpd_r) / mpd_p:+.1%})")


if __name__ == "__main__":
    main()
