import math
import sys
from time import time


class Progress:
    """Progress bar over :total: chunks of sampled work, written to :stream: (stderr by default)."""

    def __init__(self, total, length=40, name="Sampling:", stream=None):
        self.total = max(total, 1)
        self.length = length
        self.name = name
        self.stream = sys.stderr if stream is None else stream
        self.start = time()
        self.completed = 0

    def _render(self):
        fraction = min(self.completed, self.total) / self.total
        filled = math.floor(self.length * fraction)
        elapsed = time() - self.start
        remaining = elapsed * (1.0 - fraction) / fraction if fraction > 0 else math.inf
        self.stream.write(f"\r{self.name} [{'#' * filled}{'.' * (self.length - filled)}] "
                          f"{self.completed}/{self.total} chunks, {elapsed:.1f} s elapsed, {remaining:.1f} s left")
        self.stream.flush()

    def update(self, completed):
        self.completed = completed
        self._render()

    def increment(self):
        self.update(self.completed + 1)

    def done(self):
        self.update(self.total)
        self.stream.write("\n")
        self.stream.flush()
