#!/usr/bin/env python3
"""Diversity, coverage, and similarity statistics for synthetic text.

Compares a small synthetic corpus against "real" captions per image:
type-token ratio, vocabulary overlap coefficient, best-match embedding
similarity, and histogram emission for plotting.
"""

import numpy as np

from groundforge import histogram, overlap_coefficient, ttr
from groundforge.mocks import mock_backend
from groundforge.text_analysis import ImageTextGroup, image_similarity
from groundforge.text_synthesis import LexiconTagger, build_concept_list, sample_concepts

real = {
    "img-0": ["a dog runs across the grass", "a brown dog in a field"],
    "img-1": ["a kettle on the stove", "a kitchen with a window"],
}
synthetic = {
    "img-0": ["a playful dog leaping over tall green grass near a fence"],
    "img-1": ["a steel kettle steams on a stove beside a bright window"],
}

print("type-token ratio (diversity):")
for image_id in real:
    r = ttr(" ".join(real[image_id]))
    s = ttr(" ".join(synthetic[image_id]))
    print(f"  {image_id}: real={r:.3f} synthetic={s:.3f}")

print("\nvocabulary overlap coefficient (coverage):")
for image_id in real:
    vocab_r = set(" ".join(real[image_id]).lower().split())
    vocab_s = set(" ".join(synthetic[image_id]).lower().split())
    print(f"  {image_id}: {overlap_coefficient(vocab_s, vocab_r):.3f}")

embedder = mock_backend("embed", seed=0)
embed = lambda text: np.asarray(embedder.call({"text": text})["embedding"])

print("\nbest-match embedding similarity per image:")
scores = []
for image_id in real:
    group = ImageTextGroup(image_id, tuple(synthetic[image_id]), tuple(real[image_id]))
    score = image_similarity(group, embed)
    scores.append(score)
    print(f"  {image_id}: {score:.3f}")

counts = histogram(scores, -1.0, 1.0, 8)
print("\nsimilarity histogram over [-1, 1):", counts)

# Concept harvesting feeds the higher-purity synthesis route.
captions = [c for texts in real.values() for c in texts]
concepts = build_concept_list(captions, LexiconTagger())
print("\nconcept list from the real captions:", dict(concepts.entries))
print("frequency-weighted sample:", sample_concepts(concepts, k=2, seed=5))
