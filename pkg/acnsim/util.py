from threading import Lock


class AtomicCounter:
    """Thread-safe tally shared by the samplers of one process."""

    value: int
    lock: Lock

    def __init__(self, first_val: int = 0) -> None:
        self.value = first_val
        self.lock = Lock()

    def add(self, amount: int = 1) -> int:
        with self.lock:
            self.value += amount
            return self.value

    def __int__(self) -> int:
        with self.lock:
            return self.value
