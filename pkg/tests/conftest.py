import time

import numpy as np
import pytest

from ftnlab import dsp
from ftnlab import receivers as rx
from ftnlab.neural import Model, TrainConfig, cnn_specs, dnn_specs, train

SMOKE_TAU = 0.7

# desk-scale training: narrower CNN, fewer epochs than the reference campaign
CNN_SMOKE = dict(width=16, blocks=2)
CNN_TRAIN = TrainConfig(batch_size=512, lr_init=0.01, max_epochs=200, esn0_range_db=(0.0, 12.0), seed=11)
DNN_TRAIN = TrainConfig(batch_size=4096, minibatch_size=256, lr_init=1e-3, l2=0.0, max_epochs=400,
                        esn0_range_db=(8.0, 16.0), loss="mse", seed=12)

ACCEPTANCE: list[str] = []


def _meta(kind, taps):
    return {"kind": kind, "tau": SMOKE_TAU, "l_i": taps.l_i, "n_s": 50, "n_pad": 12, "m": 2}


@pytest.fixture(scope="session")
def smoke_taps():
    return dsp.ftn_taps(SMOKE_TAU)


@pytest.fixture(scope="session")
def trained_cnn(smoke_taps):
    """CNN for tau=0.7 trained once per session; returns (model, seconds)."""
    model = Model(cnn_specs(**CNN_SMOKE), (74, 2), seed=0, meta=_meta("cnn", smoke_taps))
    sampler = rx.BlockSampler(smoke_taps, esn0_range_db=CNN_TRAIN.esn0_range_db)
    t0 = time.perf_counter()
    res = train(model, sampler.cnn_batch, CNN_TRAIN)
    return res.model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def trained_dnn(smoke_taps):
    model = Model(dnn_specs(), (1, 148), seed=0, meta=_meta("dnn", smoke_taps))
    sampler = rx.BlockSampler(smoke_taps, esn0_range_db=DNN_TRAIN.esn0_range_db)
    t0 = time.perf_counter()
    res = train(model, sampler.dnn_batch, DNN_TRAIN)
    return res.model, time.perf_counter() - t0


@pytest.fixture
def record():
    """Log one acceptance line; printed in the terminal summary."""
    def _record(name, passed, detail):
        ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        print(ACCEPTANCE[-1])
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def paired_z(a, b):
    """z-score of mean(a - b) over paired per-frame error counts (negative: a has fewer errors)."""
    d = np.asarray(a, float) - np.asarray(b, float)
    sd = d.std(ddof=1)
    if sd == 0:
        return 0.0 if d.mean() == 0 else float(np.sign(d.mean()) * np.inf)
    return float(d.mean() / (sd / np.sqrt(len(d))))
