import numpy as np
import pytest

from gaitedge.datagen import clean_domain, generate_sequences


def brute_erode(mask: np.ndarray, k: int) -> np.ndarray:
    """Double-loop min filter with zero padding."""
    h, w = mask.shape
    r = k // 2
    out = np.zeros_like(mask)
    for i in range(h):
        for j in range(w):
            v = 1.0
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    y, x = i + di, j + dj
                    v = min(v, mask[y, x] if 0 <= y < h and 0 <= x < w else 0.0)
            out[i, j] = v
    return out


def brute_dilate(mask: np.ndarray, k: int) -> np.ndarray:
    h, w = mask.shape
    r = k // 2
    out = np.zeros_like(mask)
    for i in range(h):
        for j in range(w):
            v = 0.0
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    y, x = i + di, j + dj
                    if 0 <= y < h and 0 <= x < w:
                        v = max(v, mask[y, x])
            out[i, j] = v
    return out


def shifted_stack(masks: np.ndarray, k: int, fill: float) -> np.ndarray:
    """All (k*k) shifts of a (N, H, W) batch, padded with ``fill``; shape (k*k, N, H, W)."""
    r = k // 2
    n, h, w = masks.shape
    padded = np.full((n, h + 2 * r, w + 2 * r), fill)
    padded[:, r : r + h, r : r + w] = masks
    return np.stack([padded[:, dy : dy + h, dx : dx + w] for dy in range(k) for dx in range(k)])


def batch_erode(masks: np.ndarray, k: int) -> np.ndarray:
    return shifted_stack(masks, k, 0.0).min(axis=0)


def batch_dilate(masks: np.ndarray, k: int) -> np.ndarray:
    return shifted_stack(masks, k, 0.0).max(axis=0)


def random_masks(n: int, shape=(16, 16), seed: int = 0) -> np.ndarray:
    """Random binary masks of varying density."""
    rng = np.random.default_rng(seed)
    density = rng.uniform(0.1, 0.9, size=(n, 1, 1))
    return (rng.random((n, *shape)) < density).astype(np.float64)


def walker_frames(n: int, seed: int = 0) -> list:
    """``n`` clean-domain walker frames over several subjects, conditions and views."""
    seqs = generate_sequences(
        clean_domain(n_frames=4), n_subjects=5, conditions=("NM#01", "BG#01", "CL#01"), seed=seed
    )
    frames = [f for s in seqs for f in s.frames]
    step = max(1, len(frames) // n)
    return frames[::step][:n]


@pytest.fixture(scope="session")
def walkers():
    return walker_frames(200)


_VERDICTS: list = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}" + (f": {detail}" if detail else "")
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
