"""
Patient-wise splitting
======================

Frames of one patient must never land in two splits. Generate a small
corpus, split it 70/10/20 by patient and show that the split is
reproducible. Usage: python demos/02_patient_split.py [out_dir]
"""

import sys
from pathlib import Path

from framerestore.imaging import patient_wise_split, validate_manifest
from framerestore.synthetic import generate_scene_corpus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")

manifest = generate_scene_corpus(out / "split_demo", n_frames=60, n_patients=12, size=32, seed=2)
print(f"{len(manifest)} frames from {len(manifest.patient_ids)} patients, violations: {validate_manifest(manifest)}")

train, val, test = patient_wise_split(manifest, (0.7, 0.1, 0.2), seed=7)
for name, part in (("train", train), ("val", val), ("test", test)):
    print(f"{name:5s} {len(part):3d} frames  patients {sorted(part.patient_ids)}")

# whole patients move together, so sizes only approximate the ratios
shared = set(train.patient_ids) & (set(val.patient_ids) | set(test.patient_ids))
print("patients shared between train and held-out splits:", shared or "none")

again = patient_wise_split(manifest, (0.7, 0.1, 0.2), seed=7)
print("same seed, same split:", [p.frame_ids for p in again] == [p.frame_ids for p in (train, val, test)])
