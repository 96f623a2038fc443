import os

import numpy as np
import pytest

from cntnn import ArchitectureSpec, build_network, synthetic_dataset
from cntnn.data import CIFAR_FILES, MNIST_FILES, _find
from cntnn.specs import conv2d, dense, recurrent

DATA_ROOT = os.environ.get("CNT_DATA_ROOT", "./data")


def mnist_present(split="train"):
    images, labels = MNIST_FILES[split]
    return _find(DATA_ROOT, images) is not None and _find(DATA_ROOT, labels) is not None


def cifar_present(split="train"):
    base = os.path.join(DATA_ROOT, "cifar-10-batches-bin")
    if not os.path.isdir(base):
        base = DATA_ROOT
    return all(_find(base, n) is not None for n in CIFAR_FILES[split])


def require_mnist():
    if not (mnist_present("train") and mnist_present("test")):
        pytest.skip(
            f"MNIST files not found under {DATA_ROOT!r} (set CNT_DATA_ROOT); expected "
            "train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte, "
            "t10k-labels-idx1-ubyte (optionally .gz)"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def blob_dataset():
    return synthetic_dataset(0, 200, 4, 2)


def fc_spec(widths, activation="sigmoid", task="classification", kind="FC"):
    layers = [dense(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
    return ArchitectureSpec(kind, layers, activation, task).validate()


def small_cnn_spec(activation="relu", h=6, w=6, channels=1, out_channels=2, kernel=3, stride=1, classes=3):
    conv = conv2d(channels, h, w, out_channels, kernel, stride)
    return ArchitectureSpec(
        "CNN", [conv, dense(conv.fan_out, classes)], activation, "classification"
    ).validate()


def small_rnn_spec(activation="sigmoid", d=3, hidden=4, steps=5, classes=2):
    return ArchitectureSpec(
        "RNN", [recurrent(d, hidden, steps), dense(hidden, classes)], activation, "classification"
    ).validate()


def make_net(spec, seed=0, init_std=0.5):
    return build_network(spec, init_std, seed)


# One line per acceptance criterion, echoed after the test summary so the
# verdicts are visible even when pytest captures stdout.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
