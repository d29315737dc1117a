"""Shared, cached builds of gallery instances and their surveys."""

from __future__ import annotations

import functools

from prodform import gallery
from prodform.classifier import survey
from prodform.immersion import DiffConfig


@functools.lru_cache(maxsize=None)
def instance(name: str, **params):
    return gallery.build(name, **params)


@functools.lru_cache(maxsize=None)
def surveyed(name: str, points_per_axis: int | None = None):
    inst = instance(name)
    pts = inst.immersion.box.grid(points_per_axis)
    return inst, survey(inst.immersion, pts, DiffConfig())


def sample_points(name: str, k: int = 3):
    inst = instance(name)
    return inst.immersion.box.grid(k)
