"""Encrypted-at-rest payload store referenced from audit records.

The chain itself carries only digests; the actual input/output payloads are
AES-256-GCM encrypted blobs addressed by opaque references.
"""

from __future__ import annotations

import os
import uuid
from pathlib import Path

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import NotFoundError

_NONCE_BYTES = 12


class PayloadVault:
    def __init__(self, directory: Path | None = None, key: bytes | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            key_path = self.directory / ".key"
            if key is None:
                if key_path.exists():
                    key = bytes.fromhex(key_path.read_text().strip())
                else:
                    key = AESGCM.generate_key(bit_length=256)
                    key_path.write_text(key.hex())
                    os.chmod(key_path, 0o600)
        elif key is None:
            key = AESGCM.generate_key(bit_length=256)
        self._aead = AESGCM(key)
        self._memory: dict[str, bytes] = {}

    def store(self, payload: bytes) -> str:
        ref = uuid.uuid4().hex
        nonce = os.urandom(_NONCE_BYTES)
        blob = nonce + self._aead.encrypt(nonce, payload, ref.encode("ascii"))
        if self.directory is None:
            self._memory[ref] = blob
        else:
            (self.directory / f"{ref}.bin").write_bytes(blob)
        return ref

    def load(self, ref: str) -> bytes:
        if self.directory is None:
            blob = self._memory.get(ref)
            if blob is None:
                raise NotFoundError(f"payload {ref} not found")
        else:
            path = self.directory / f"{ref}.bin"
            if not path.exists():
                raise NotFoundError(f"payload {ref} not found")
            blob = path.read_bytes()
        nonce, ciphertext = blob[:_NONCE_BYTES], blob[_NONCE_BYTES:]
        return self._aead.decrypt(nonce, ciphertext, ref.encode("ascii"))
