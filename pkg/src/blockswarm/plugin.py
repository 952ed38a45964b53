"""External trainers over newline-delimited JSON on a child's stdin/stdout.

Requests, one JSON object per line::

    {"cmd": "init", "block": [...], "dataset": {...}, "seed": N, "repeats": T}
    {"cmd": "epoch"}   -> {"loss": x, "acc": y}
    {"cmd": "close"}

``init`` and ``close`` answer ``{"ok": true}``; any failure answers
``{"error": "..."}``. A worker serves sessions one after another until its
stdin closes, so the client keeps a pool of idle workers.

Running this module starts a worker backed by the synthetic oracle.
"""
from __future__ import annotations

import json
import shlex
import subprocess
import sys
import threading
from typing import IO

from .datasets import DatasetDescriptor
from .encoding import BlockSpec
from .oracle import OracleConfig, SyntheticTrainer


class PluginError(RuntimeError):
    pass


class _Worker:
    def __init__(self, argv: list[str]):
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def request(self, msg: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps(msg) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise PluginError(f"plugin worker died: {exc}") from exc
        if not line:
            raise PluginError(f"plugin worker exited with code {self.proc.poll()}")
        reply = json.loads(line)
        if "error" in reply:
            raise PluginError(reply["error"])
        return reply

    def stop(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        self.proc.stdout.close()


class PluginTrainer:
    """Trainer that delegates each training session to a worker process."""

    def __init__(self, command: str | list[str]):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._idle: list[_Worker] = []
        self._lock = threading.Lock()

    def init(self, spec: BlockSpec, dataset: DatasetDescriptor, seed: int, repeats: int = 1):
        with self._lock:
            worker = self._idle.pop() if self._idle else None
        if worker is not None and worker.proc.poll() is not None:
            worker.stop()
            worker = None
        if worker is None:
            worker = _Worker(self.argv)
        try:
            worker.request(
                {
                    "cmd": "init",
                    "block": list(spec.growth_rates),
                    "dataset": dataset.to_dict(),
                    "seed": seed,
                    "repeats": repeats,
                }
            )
        except PluginError:
            worker.stop()
            raise
        return worker

    def train_epoch(self, state: _Worker) -> tuple[float, float]:
        reply = state.request({"cmd": "epoch"})
        return float(reply["loss"]), float(reply["acc"])

    def close(self, state: _Worker) -> None:
        try:
            state.request({"cmd": "close"})
        except PluginError:
            state.stop()
            return
        with self._lock:
            self._idle.append(state)

    def shutdown(self) -> None:
        with self._lock:
            workers, self._idle = self._idle, []
        for w in workers:
            w.stop()


def serve(trainer, stdin: IO[str], stdout: IO[str]) -> None:
    """Answer protocol requests until ``stdin`` reaches EOF."""
    state = None
    for line in stdin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
            cmd = msg.get("cmd")
            if cmd == "init":
                spec = BlockSpec(tuple(msg["block"]))
                dataset = DatasetDescriptor.from_dict(msg["dataset"])
                state = trainer.init(spec, dataset, int(msg.get("seed", 0)),
                                     repeats=int(msg.get("repeats", 1)))
                reply = {"ok": True}
            elif cmd == "epoch":
                if state is None:
                    raise PluginError("epoch before init")
                loss, acc = trainer.train_epoch(state)
                reply = {"loss": loss, "acc": acc}
            elif cmd == "close":
                state = None
                reply = {"ok": True}
            else:
                raise PluginError(f"unknown cmd {cmd!r}")
        except Exception as exc:  # the client gets every failure as a reply
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    cfg = OracleConfig(**json.loads(args[0])) if args else OracleConfig()
    serve(SyntheticTrainer(cfg), sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
