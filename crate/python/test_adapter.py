import json
import logging
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
import adapter  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "core" / "data"


@pytest.fixture(scope="session")
def cli():
    subprocess.run(["cargo", "build", "-q", "-p", "adaptrain-cli"], cwd=ROOT, check=True)
    return ROOT / "target" / "debug" / "adaptrain"


def test_ap_vectors_match_bit_exactly():
    cases = json.loads((DATA / "ap_vectors.json").read_text())["cases"]
    for c in cases:
        assert adapter.average_precision(c["scores"], [bool(x) for x in c["labels"]]) == c["ap"], c["name"]


def test_catalog_digest_matches_golden_hello():
    first = json.loads((DATA / "bridge_golden.jsonl").read_text().splitlines()[1])
    assert json.loads(first["line"])["catalog_digest"] == adapter.catalog_digest()


def test_focal_with_zero_focusing_is_bce():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(16, 5))
    y = (rng.random((16, 5)) < 0.3).astype(float)
    lf, gf = adapter.focal(z, y, gamma=0.0)
    lb, gb = adapter.bce(z, y)
    assert lf == pytest.approx(lb, rel=1e-12)
    np.testing.assert_allclose(gf, gb, rtol=1e-10, atol=1e-15)


def test_focal_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 3))
    y = (rng.random((4, 3)) < 0.5).astype(float)
    _, g = adapter.focal(z, y)
    h = 1e-6
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        fd = (adapter.focal(zp, y)[0] - adapter.focal(zm, y)[0]) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_unsupported_strategy_falls_back_with_warning(caplog):
    trainer = adapter.ToyTrainer(classes=4, seed=2, epochs=3)
    with caplog.at_level(logging.WARNING, logger="adapter"):
        m = trainer.train_epoch({"aug": "Basic", "opt": "LARS", "lrs": "WarmUp", "loss": "ASL"})
    text = caplog.text
    assert "LARS" in text and "SGD" in text
    assert "ASL" in text and "WarmUp" in text
    assert 0.0 <= m["map_val"] <= 1.0


def test_training_improves_map():
    trainer = adapter.ToyTrainer(classes=6, rho=1.0, seed=3, epochs=5)
    before = trainer.metrics()["map_val"]
    for _ in range(5):
        after = trainer.train_epoch({"aug": "Basic", "opt": "Adam", "lrs": "Cosine", "loss": "BCE"})["map_val"]
    assert after > before + 0.1


def test_three_epoch_session_over_stdio(cli):
    proc = subprocess.Popen(
        [str(cli), "serve", "--seed", "4", "--steps", "3"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )
    trainer = adapter.ToyTrainer(classes=8, rho=2.0, seed=4, epochs=3)
    assert adapter.session(proc.stdout, proc.stdin, trainer, adapter.catalog_digest()) == 3
    proc.stdin.close()
    assert proc.wait(timeout=30) == 0


def test_cli_session_over_tcp(cli):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = subprocess.Popen([str(cli), "serve", "--steps", "3", "--listen", f"127.0.0.1:{port}"])
    rc = None
    for _ in range(100):
        rc = adapter.main(["--connect", f"127.0.0.1:{port}", "--epochs", "3", "--classes", "4"])
        if rc == 0:
            break
        time.sleep(0.05)
    assert rc == 0
    assert server.wait(timeout=30) == 0
