from multiprocessing import Pool
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """Map over tasks, in a process pool when workers > 1; results keep task order."""
    if workers <= 1 or len(tasks) < 2:
        return [func(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * workers))
    with Pool(processes=workers) as pool:
        return pool.map(func, tasks, chunksize=chunksize)
