"""Seeded synthetic check-ins with planted mobility profiles."""

from stgraphrl.synth.generator import (
    SyntheticCorpus,
    generate,
    read_labels,
    write_checkins,
    write_labels,
)
from stgraphrl.synth.profiles import (
    KernelRow,
    MobilityProfile,
    ProfileError,
    ProfileSlot,
    default_profiles,
    profile_distance,
)

__all__ = [
    "KernelRow",
    "MobilityProfile",
    "ProfileError",
    "ProfileSlot",
    "SyntheticCorpus",
    "default_profiles",
    "generate",
    "profile_distance",
    "read_labels",
    "write_checkins",
    "write_labels",
]
