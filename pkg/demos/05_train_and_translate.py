"""
Training a small translator
===========================

A few epochs of unpaired training on synthetic scenes, where domain A holds
darkened and blurred frames and domain B clean ones. Prints the loss means
per epoch, then the PSNR of degraded and translated frames against their
clean twins. The full 30-epoch loop is ``framerestore e2e-synthetic``.
Usage: python demos/05_train_and_translate.py [out_dir] [epochs]
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from framerestore.cyclegan import Translator, fit
from framerestore.degradation import SpecSampler, build_paired_corpus
from framerestore.imaging import load_image, psnr
from framerestore.pipeline import e2e_config
from framerestore.synthetic import generate_scene_corpus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "train_demo"
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 4

scenes = generate_scene_corpus(out / "data", n_frames=60, n_patients=12, size=64, seed=0)
sampler = SpecSampler(required=("LowIllumination",), gain_range=(0.4, 0.75))
corpus = build_paired_corpus(scenes, sampler, out / "corpus", seed=1)

# unpaired: the first half of the degraded frames against the second half of the clean ones
half = len(scenes) // 2
domain_a = corpus.degraded.with_records(corpus.degraded.records[:half])
domain_b = scenes.with_records(scenes.records[half:])

config = replace(e2e_config().gan, epochs=epochs)
checkpoints = fit(domain_a, domain_b, config, out / "checkpoints",
                  progress=lambda e, m: print(f"epoch {e}: G {m['generator_total']:.3f}  "
                                              f"D_A {m['d_a']:.3f}  D_B {m['d_b']:.3f}"))

# held-out degraded frames, compared with their clean twins
translator = Translator.from_checkpoint(checkpoints[-1])
clean_of = {d: c for c, d in corpus.pairs}
clean_paths = scenes.by_id()
before, after = [], []
for rec in corpus.degraded.records[half:]:
    clean = load_image(clean_paths[clean_of[rec.frame_id]].path)
    degraded = load_image(rec.path)
    before.append(psnr(clean, degraded))
    after.append(psnr(clean, translator(degraded)))
print(f"median PSNR vs clean: degraded {np.median(before):.2f} dB, translated {np.median(after):.2f} dB")
