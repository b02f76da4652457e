"""Reference external trainer for the `adaptrain serve` bridge.

Trains a linear multi-label model on synthetic long-tailed data and applies
the controller's decisions for one epoch per `decide` message.

    adaptrain serve --listen 127.0.0.1:7000 &
    python3 python/adapter.py --connect 127.0.0.1:7000 --classes 8 --rho 2 --seed 1

Implemented strategies and fallbacks:

    LOSS  BCE, Focal, CB        ASL -> Focal, MSE -> BCE
    LRS   Step, Cosine, OneCycle  MultiStep -> Step, Linear -> Cosine, WarmUp -> OneCycle
    OPT   SGD, Adam             AdamW, RAdam -> Adam, LARS -> SGD
    AUG   input noise level: Basic 0, CutMix 0.1, MixUp 0.1, FastAA 0.15, RandAugment 0.2
"""

import argparse
import hashlib
import json
import logging
import socket
import sys
from pathlib import Path

import numpy as np

PROTOCOL_VERSION = "1"
DEFAULT_CATALOG = Path(__file__).resolve().parent.parent / "crates" / "core" / "data" / "catalog.json"

LOSS_FALLBACK = {"ASL": "Focal", "MSE": "BCE"}
LRS_FALLBACK = {"MultiStep": "Step", "Linear": "Cosine", "WarmUp": "OneCycle"}
OPT_FALLBACK = {"AdamW": "Adam", "RAdam": "Adam", "LARS": "SGD"}
AUG_NOISE = {"Basic": 0.0, "CutMix": 0.1, "MixUp": 0.1, "FastAA": 0.15, "RandAugment": 0.2}

log = logging.getLogger("adapter")


class ProtocolError(Exception):
    pass


def catalog_digest(path=DEFAULT_CATALOG):
    entries = json.loads(Path(path).read_text())
    return hashlib.sha256(json.dumps(entries, separators=(",", ":")).encode()).hexdigest()


# Metrics, matching the controller's env module.


def average_precision(scores, labels):
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            total += hits / rank
    return total / hits if hits else None


def compute_map(scores, labels):
    aps = [average_precision(s, l) for s, l in zip(scores, labels)]
    aps = [a for a in aps if a is not None]
    return sum(aps) / len(aps)


def f1_at(scores, labels, threshold=0.5):
    tp = sum(1 for s, l in zip(scores, labels) if s >= threshold and l)
    fp = sum(1 for s, l in zip(scores, labels) if s >= threshold and not l)
    fn = sum(1 for s, l in zip(scores, labels) if s < threshold and l)
    return 1.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)


def strata(frequencies):
    k = len(frequencies)
    order = sorted(range(k), key=lambda i: -frequencies[i])
    q = min(max(k // 4, 1), k)
    mid = order[q : k - q] if k > 2 * q else order
    return order[:q], mid, order[k - q :]


def stratified_f1(scores, labels):
    groups = strata([sum(l) for l in labels])
    return tuple(sum(f1_at(scores[c], labels[c]) for c in g) / len(g) for g in groups)


def bacc(scores, labels):
    recalls = []
    for s, l in zip(scores, labels):
        pos = sum(l)
        if pos:
            recalls.append(sum(1 for x, y in zip(s, l) if y and x >= 0.5) / pos)
    return sum(recalls) / len(recalls)


# Losses. Each returns (mean loss, gradient w.r.t. logits).


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def bce(z, y, weights=None):
    p = np.clip(sigmoid(z), 1e-12, 1 - 1e-12)
    w = np.ones(y.shape[1]) if weights is None else weights
    loss = -(y * np.log(p) + (1 - y) * np.log(1 - p)) * w
    return loss.mean(), (p - y) * w / y.size


def focal(z, y, gamma=2.0):
    p = np.clip(sigmoid(z), 1e-12, 1 - 1e-12)
    pt = np.where(y > 0, p, 1 - p)
    loss = -((1 - pt) ** gamma) * np.log(pt)
    # d/dz of -(1-pt)^g log pt, with dpt/dz = pt (1 - pt) * sign
    sign = np.where(y > 0, 1.0, -1.0)
    dpt = gamma * (1 - pt) ** (gamma - 1) * np.log(pt) - (1 - pt) ** gamma / pt
    grad = dpt * pt * (1 - pt) * sign
    return loss.mean(), grad / y.size


def class_balanced_weights(y, beta=0.999):
    n = np.maximum(y.sum(axis=0), 1.0)
    w = (1 - beta) / (1 - beta**n)
    return w * len(w) / w.sum()


def lr_at(schedule, progress, base):
    if schedule == "Step":
        return base * 0.1 ** int(min(progress, 0.999) * 3)
    if schedule == "Cosine":
        return base * 0.5 * (1 + np.cos(np.pi * progress))
    if progress < 0.3:
        return base * (0.1 + 0.9 * progress / 0.3)
    return base * 0.5 * (1 + np.cos(np.pi * (progress - 0.3) / 0.7))


def resolve(component, name, implemented, fallback):
    if name in implemented:
        return name
    if name in fallback:
        log.warning("%s %s not implemented; using %s", component, name, fallback[name])
        return fallback[name]
    log.warning("unknown %s %s; using %s", component, name, implemented[0])
    return implemented[0]


class ToyTrainer:
    """Linear multi-label classifier over synthetic long-tailed data."""

    def __init__(self, classes=8, rho=2.0, seed=0, epochs=30, features=16, n_train=1024, n_val=512, batch=64):
        self.rng = np.random.default_rng(seed)
        self.epochs, self.batch = epochs, batch
        true_w = self.rng.normal(size=(features, classes))
        prevalence = 0.4 * np.exp(-rho * np.arange(classes) / max(classes - 1, 1))

        def sample(n):
            x = self.rng.normal(size=(n, features))
            z = x @ true_w + 0.5 * self.rng.normal(size=(n, classes))
            cut = np.array([np.quantile(z[:, k], 1 - q) for k, q in enumerate(prevalence)])
            return x, (z > cut).astype(float)

        self.x, self.y = sample(n_train)
        self.xv, self.yv = sample(n_val)
        self.cb_weights = class_balanced_weights(self.y)
        self.w = np.zeros((features, classes))
        self.b = np.zeros(classes)
        self.adam = [np.zeros_like(self.w), np.zeros_like(self.w), np.zeros_like(self.b), np.zeros_like(self.b), 0]
        self.epoch = 0
        self.last_grad_norm, self.last_update = 0.0, 0.0
        self.last_loss_train = None

    def loss(self, name, z, y):
        if name == "Focal":
            return focal(z, y)
        if name == "CB":
            return bce(z, y, self.cb_weights)
        return bce(z, y)

    def metrics(self):
        zv = self.xv @ self.w + self.b
        probs = sigmoid(zv).T.tolist()
        labels = (self.yv.T > 0).tolist()
        head, mid, tail = stratified_f1(probs, labels)
        loss_val = bce(zv, self.yv)[0]
        if self.last_loss_train is None:
            self.last_loss_train = bce(self.x @ self.w + self.b, self.y)[0]
        return {
            "map_val": compute_map(probs, labels),
            "loss_train": float(self.last_loss_train),
            "loss_val": float(loss_val),
            "grad_norm": float(self.last_grad_norm),
            "rel_update_mag": float(self.last_update),
            "texture_richness": 0.5,
            "rare_f1": tail,
            "head_f1": head,
            "mid_f1": mid,
            "tail_f1": tail,
            "bacc": bacc(probs, labels),
        }

    def train_epoch(self, config):
        loss_name = resolve("loss", config["loss"], ["BCE", "Focal", "CB"], LOSS_FALLBACK)
        schedule = resolve("lrs", config["lrs"], ["Step", "Cosine", "OneCycle"], LRS_FALLBACK)
        opt = resolve("opt", config["opt"], ["SGD", "Adam"], OPT_FALLBACK)
        noise = AUG_NOISE.get(config["aug"])
        if noise is None:
            log.warning("unknown aug %s; using Basic", config["aug"])
            noise = 0.0
        base = 0.05 if opt == "Adam" else 2.0
        order = self.rng.permutation(len(self.x))
        n_batches = len(order) // self.batch
        start = self.w.copy()
        losses, grads = [], []
        for i in range(n_batches):
            idx = order[i * self.batch : (i + 1) * self.batch]
            x = self.x[idx] + noise * self.rng.normal(size=(len(idx), self.x.shape[1]))
            loss, dz = self.loss(loss_name, x @ self.w + self.b, self.y[idx])
            gw, gb = x.T @ dz, dz.sum(axis=0)
            lr = lr_at(schedule, (self.epoch + i / n_batches) / self.epochs, base)
            if opt == "Adam":
                gw, gb = self.adam_step(gw, gb)
            self.w -= lr * gw
            self.b -= lr * gb
            losses.append(loss)
            grads.append(np.sqrt((gw**2).sum() + (gb**2).sum()))
        self.epoch += 1
        self.last_loss_train = float(np.mean(losses))
        self.last_grad_norm = float(np.mean(grads))
        self.last_update = float(np.linalg.norm(self.w - start) / max(np.linalg.norm(self.w), 1e-12))
        return self.metrics()

    def adam_step(self, gw, gb, b1=0.9, b2=0.999, eps=1e-8):
        mw, vw, mb, vb, t = self.adam
        t += 1
        mw = b1 * mw + (1 - b1) * gw
        vw = b2 * vw + (1 - b2) * gw**2
        mb = b1 * mb + (1 - b1) * gb
        vb = b2 * vb + (1 - b2) * gb**2
        self.adam = [mw, vw, mb, vb, t]
        c1, c2 = 1 - b1**t, 1 - b2**t
        return (mw / c1) / (np.sqrt(vw / c2) + eps), (mb / c1) / (np.sqrt(vb / c2) + eps)


class Channel:
    def __init__(self, reader, writer):
        self.reader, self.writer = reader, writer
        self.seq = 0
        self.peer_seq = -1

    def send(self, kind, **payload):
        line = json.dumps({"type": kind, "seq": self.seq, **payload}, separators=(",", ":"))
        self.writer.write(line + "\n")
        self.writer.flush()
        self.seq += 1

    def recv(self):
        line = self.reader.readline()
        if not line:
            raise ProtocolError("controller closed the connection")
        msg = json.loads(line)
        if msg["seq"] <= self.peer_seq:
            raise ProtocolError(f"sequence went backwards: {msg['seq']}")
        self.peer_seq = msg["seq"]
        return msg


def session(reader, writer, trainer, digest):
    """Runs one session; returns the number of result messages sent."""
    chan = Channel(reader, writer)
    chan.send("hello", protocol_version=PROTOCOL_VERSION, catalog_digest=digest)
    ack = chan.recv()
    if ack["type"] != "hello_ack":
        raise ProtocolError(f"expected hello_ack, got {ack}")
    chan.send("observe", metrics=trainer.metrics())
    results = 0
    while True:
        msg = chan.recv()
        if msg["type"] == "shutdown":
            return results
        if msg["type"] == "error":
            raise ProtocolError(f"{msg['code']}: {msg['detail']}")
        if msg["type"] != "decide":
            raise ProtocolError(f"unexpected {msg['type']}")
        metrics = trainer.train_epoch(msg["config"])
        chan.send("result", metrics=metrics, terminal=trainer.epoch >= trainer.epochs)
        results += 1


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--connect", metavar="HOST:PORT")
    where.add_argument("--stdio", action="store_true")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--catalog", default=str(DEFAULT_CATALOG))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="adapter: %(message)s")

    trainer = ToyTrainer(classes=args.classes, rho=args.rho, seed=args.seed, epochs=args.epochs)
    digest = catalog_digest(args.catalog)
    try:
        if args.stdio:
            n = session(sys.stdin, sys.stdout, trainer, digest)
        else:
            host, port = args.connect.rsplit(":", 1)
            with socket.create_connection((host, int(port))) as sock:
                with sock.makefile("r") as r, sock.makefile("w") as w:
                    n = session(r, w, trainer, digest)
    except (ProtocolError, OSError, ValueError, KeyError) as e:
        log.error("%s", e)
        return 1
    log.info("session finished after %d epochs", n)
    return 0


if __name__ == "__main__":
    sys.exit(main())
