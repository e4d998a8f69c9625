import numpy as np
import pytest

from deba.colorspace import ImageTensor


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_image(rng, h=32, w=32, space="RGB"):
    """Low-frequency random image: decaying spectrum like a photograph."""
    c = 1 if space == "GRAY" else 3
    coarse = rng.random((c, 5, 5))
    ys = np.linspace(0, 4, h)
    xs = np.linspace(0, 4, w)
    y0 = np.minimum(ys.astype(int), 3)
    x0 = np.minimum(xs.astype(int), 3)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    img = (
        coarse[:, y0][:, :, x0] * (1 - fy) * (1 - fx)
        + coarse[:, y0 + 1][:, :, x0] * fy * (1 - fx)
        + coarse[:, y0][:, :, x0 + 1] * (1 - fy) * fx
        + coarse[:, y0 + 1][:, :, x0 + 1] * fy * fx
    )
    img += 0.03 * rng.standard_normal(img.shape)
    return ImageTensor(np.clip(img, 0, 1), space)


@pytest.fixture
def make_image(rng):
    def _make(h=32, w=32, space="RGB"):
        return smooth_image(rng, h, w, space)

    return _make


# --- acceptance reporting --------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


class _Recorder:
    def __init__(self, key, title):
        self.key = key
        self.title = title
        self.details: list[str] = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc is not None:
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else exc_type.__name__
            detail = f"{detail}; {msg}" if detail else msg
        ACCEPTANCE_RESULTS[self.key] = (status, f"{self.title}: {detail}")
        return False


@pytest.fixture
def criterion():
    return _Recorder


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[1:])):
        status, text = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key:<4}{status}  {text}")
