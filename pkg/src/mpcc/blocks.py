"""Key-free block types shared by the encoder, the cloud and the consumers."""

from dataclasses import dataclass, field

import numpy as np

FLAG_SENSITIVE = 0x01
FLAG_TRANSFORM = 0x02


@dataclass(frozen=True)
class CipherBlock:
    measurements: np.ndarray
    index: int
    sensitive: bool = False
    transform_mode: bool = False

    @property
    def flags(self):
        return ((FLAG_SENSITIVE if self.sensitive else 0)
                | (FLAG_TRANSFORM if self.transform_mode else 0))


@dataclass(frozen=True)
class DecompressedBlock:
    z: np.ndarray
    index: int
    diagnostics: dict = field(default_factory=dict, compare=False)
