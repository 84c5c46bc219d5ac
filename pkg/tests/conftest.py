from collections import deque
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def _skimage_data_file(name: str) -> Path:
    skdata = pytest.importorskip("skimage.data")
    path = Path(skdata.__file__).parent / name
    if not path.exists():
        pytest.skip(f"scikit-image data file {name} not available")
    return path


@pytest.fixture(scope="session")
def chelsea_path() -> Path:
    return _skimage_data_file("chelsea.png")


@pytest.fixture(scope="session")
def coffee_path() -> Path:
    return _skimage_data_file("coffee.png")


@pytest.fixture(scope="session")
def chelsea(chelsea_path):
    from selfception.raster import load_image

    return load_image(chelsea_path)


@pytest.fixture(scope="session")
def coffee(coffee_path):
    from selfception.raster import load_image

    return load_image(coffee_path)


def flood_fill_components(labels: np.ndarray) -> np.ndarray:
    """4-connected components of equal labels by plain BFS, ids in raster
    order of each component's first pixel."""
    h, w = labels.shape
    lab = labels.tolist()
    comp = [[-1] * w for _ in range(h)]
    n = 0
    for y in range(h):
        for x in range(w):
            if comp[y][x] != -1:
                continue
            value = lab[y][x]
            comp[y][x] = n
            queue = deque([(y, x)])
            while queue:
                cy, cx = queue.popleft()
                for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny][nx] == -1 and lab[ny][nx] == value:
                        comp[ny][nx] = n
                        queue.append((ny, nx))
            n += 1
    return np.array(comp)


def naive_absorb(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Slow reference for small-component absorption: visit components in
    raster order, move an undersized one into its largest neighbor (lowest
    id on ties), then renumber survivors in raster order."""
    comp = flood_fill_components(labels)
    h, w = comp.shape
    n = int(comp.max()) + 1
    for c in range(n):
        ys, xs = np.nonzero(comp == c)
        if ys.size == 0 or ys.size >= min_size:
            continue
        nbrs = set()
        for y, x in zip(ys, xs):
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] != c:
                    nbrs.add(int(comp[ny, nx]))
        if not nbrs:
            continue
        target = min(nbrs, key=lambda t: (-int(np.count_nonzero(comp == t)), t))
        comp[ys, xs] = target
    return dense_raster_relabel(comp)


def dense_raster_relabel(ids: np.ndarray) -> np.ndarray:
    out = np.empty_like(ids)
    seen: dict[int, int] = {}
    flat = ids.ravel()
    res = out.ravel()
    for i, v in enumerate(flat.tolist()):
        if v not in seen:
            seen[v] = len(seen)
        res[i] = seen[v]
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
