"""Latest-value registers: lock-protected single-slot channels."""

from __future__ import annotations

import threading
import time
from typing import Any, Optional


class LatestValueRegister:
    """Single-writer/many-reader slot with monotone sequence numbers.

    Readers always observe a consistent (payload, seq, timestamp) triple;
    writes with a sequence number at or below the stored one are ignored
    (latest-wins by sequence, matching the action-channel contract).
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._payload: Any = None
        self._seq: int = -1
        self._timestamp: float = 0.0

    def set(self, payload: Any, seq: Optional[int] = None) -> bool:
        """Store a newer payload; returns False if ``seq`` is stale."""
        with self._lock:
            new_seq = self._seq + 1 if seq is None else seq
            if new_seq <= self._seq:
                return False
            self._payload = payload
            self._seq = new_seq
            self._timestamp = time.monotonic()
            return True

    def get(self) -> tuple[Any, int, float]:
        """(payload, seq, timestamp); payload is None before any write."""
        with self._lock:
            return self._payload, self._seq, self._timestamp

    @property
    def seq(self) -> int:
        with self._lock:
            return self._seq
