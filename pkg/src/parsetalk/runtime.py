"""A small simulated-concurrency actor runtime.

Actors process one message at a time.  Mail is kept in one FIFO channel per
(sender, receiver) pair, and a seeded RNG picks which non-empty channel is
delivered next, so interleavings vary with the seed but replay exactly.

Synchronous requests are served by running the target's handler nested inside
the requesting handler.  A request to an actor that is itself waiting on a
request (i.e. already on the handler stack) is a deadlock.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any

log = logging.getLogger(__name__)


class ProtocolViolation(Exception):
    """Raised for deadlocks, receipt overflows and similar protocol errors."""


class DeadlockError(ProtocolViolation):
    pass


@dataclass(frozen=True)
class ActorRef:
    id: int
    name: str

    def __str__(self) -> str:
        return f"{self.name}#{self.id}"


@dataclass(frozen=True)
class Message:
    name: str
    args: dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, item: str) -> Any:
        try:
            return self.args[item]
        except KeyError:
            raise AttributeError(item) from None


@dataclass(frozen=True)
class Envelope:
    step: int
    sender: ActorRef | None
    receiver: ActorRef
    message: Message
    mode: str = "async"  # "async" | "sync" | "create"

    def __str__(self) -> str:
        sender = str(self.sender) if self.sender else "-"
        tag = {"async": "", "sync": " [sync]", "create": " [create]"}[self.mode]
        return f"{self.step} {sender} -> {self.receiver} {self.message.name}{tag}"


class Actor:
    """Base behaviour; a message ``foo`` is handled by ``on_foo(msg)``."""

    system: "ActorSystem"
    ref: ActorRef

    def receive(self, msg: Message, sender: ActorRef | None) -> Any:
        handler = getattr(self, "on_" + msg.name, None)
        if handler is None:
            raise ProtocolViolation(f"{self.ref} cannot handle {msg.name}")
        self.sender = sender
        return handler(msg)

    # convenience wrappers
    def send(self, target: ActorRef, name: str, /, **args: Any) -> None:
        self.system.send(target, name, self.ref, **args)

    def ask(self, target: ActorRef, name: str, /, **args: Any) -> Any:
        return self.system.ask(target, name, self.ref, **args)

    def spawn(self, actor: "Actor", name: str | None = None) -> ActorRef:
        return self.system.spawn(actor, name, parent=self.ref)


@dataclass
class QuiescenceReport:
    delivered: int
    dead_letters: list[Envelope]
    outstanding_sync: int


class ActorSystem:
    def __init__(self, seed: int = 0, trace: bool = True):
        self.rng = random.Random(seed & 0xFFFFFFFFFFFFFFFF)
        self.actors: dict[int, Actor] = {}
        self.dead: set[int] = set()
        self.channels: dict[tuple[int, int], deque[Envelope]] = {}
        self.ready: list[tuple[int, int]] = []
        self.step = 0
        self.delivered = 0
        self.trace_enabled = trace
        self.trace: list[Envelope] = []
        self.dead_letters: list[Envelope] = []
        self._stack: list[int] = []
        self._next_id = 0

    # -- lifecycle -----------------------------------------------------
    def spawn(self, actor: Actor, name: str | None = None, parent: ActorRef | None = None) -> ActorRef:
        ref = ActorRef(self._next_id, name or type(actor).__name__)
        self._next_id += 1
        actor.system = self
        actor.ref = ref
        self.actors[ref.id] = actor
        self._record(Envelope(self.step, parent, ref, Message("create:" + type(actor).__name__), "create"))
        return ref

    def terminate(self, ref: ActorRef) -> None:
        self.actors.pop(ref.id, None)
        self.dead.add(ref.id)

    def is_alive(self, ref: ActorRef) -> bool:
        return ref.id in self.actors

    def actor(self, ref: ActorRef) -> Actor:
        return self.actors[ref.id]

    # -- messaging -----------------------------------------------------
    def send(self, target: ActorRef, name: str, sender: ActorRef | None = None, /, **args: Any) -> None:
        env = Envelope(self.step, sender, target, Message(name, args))
        if target.id not in self.actors:
            self.dead_letters.append(env)
            log.debug("dead letter: %s", env)
            return
        key = (sender.id if sender else -1, target.id)
        chan = self.channels.get(key)
        if chan is None:
            chan = self.channels[key] = deque()
        if not chan:
            self.ready.append(key)
        chan.append(env)

    def ask(self, target: ActorRef, name: str, sender: ActorRef | None = None, /, **args: Any) -> Any:
        if target.id not in self.actors:
            raise ProtocolViolation(f"synchronous request {name} to terminated actor {target}")
        if target.id in self._stack:
            raise DeadlockError(f"circular synchronous wait: {sender} -> {target} ({name})")
        env = Envelope(self.step, sender, target, Message(name, args), "sync")
        self.step += 1
        self._record(env)
        return self._dispatch(env)

    def _dispatch(self, env: Envelope) -> Any:
        actor = self.actors[env.receiver.id]
        self._stack.append(env.receiver.id)
        try:
            return actor.receive(env.message, env.sender)
        finally:
            self._stack.pop()

    def _record(self, env: Envelope) -> None:
        if self.trace_enabled:
            self.trace.append(env)

    # -- scheduling ----------------------------------------------------
    def run_until_quiescent(self, max_steps: int | None = None) -> QuiescenceReport:
        while self.ready:
            if max_steps is not None and self.delivered >= max_steps:
                raise ProtocolViolation(f"no quiescence after {max_steps} deliveries")
            i = self.rng.randrange(len(self.ready))
            key = self.ready[i]
            chan = self.channels[key]
            env = chan.popleft()
            if not chan:
                self.ready[i] = self.ready[-1]
                self.ready.pop()
            if env.receiver.id not in self.actors:
                self.dead_letters.append(env)
                continue
            delivered = Envelope(self.step, env.sender, env.receiver, env.message)
            self.step += 1
            self.delivered += 1
            self._record(delivered)
            self._dispatch(delivered)
        return QuiescenceReport(self.delivered, list(self.dead_letters), len(self._stack))

    def trace_lines(self) -> list[str]:
        return [str(e) for e in self.trace]


# -- receipt handling --------------------------------------------------
OPEN = "Open"
SUCCESS = "TerminatedSuccess"
FAILURE = "TerminatedFailure"


@dataclass
class ReceiptHandlerState:
    """Branch counting: terminal once every expected branch sent a receipt."""

    expected: int = 0
    successes: int = 0
    failures: int = 0
    status: str = OPEN
    started: bool = False

    @property
    def terminal(self) -> bool:
        return self.status != OPEN

    def _settle(self) -> None:
        if self.successes + self.failures == self.expected:
            self.status = SUCCESS if self.successes else FAILURE

    def expect(self, n: int) -> "ReceiptHandlerState":
        if self.terminal:
            raise ProtocolViolation("expect on a terminated receipt handler")
        if n < 0:
            raise ValueError("negative expectation")
        self.expected += n
        self.started = True
        self._settle()
        return self

    def success(self) -> "ReceiptHandlerState":
        return self._receipt(True)

    def failure(self) -> "ReceiptHandlerState":
        return self._receipt(False)

    def _receipt(self, ok: bool) -> "ReceiptHandlerState":
        if self.terminal or self.successes + self.failures >= self.expected:
            raise ProtocolViolation(
                f"receipt exceeds expectation ({self.successes}+{self.failures} of {self.expected})"
            )
        if ok:
            self.successes += 1
        else:
            self.failures += 1
        self._settle()
        return self


def receipt_expect(h: ReceiptHandlerState, n: int) -> ReceiptHandlerState:
    return h.expect(n)


def receipt_success(h: ReceiptHandlerState) -> ReceiptHandlerState:
    return h.success()


def receipt_failure(h: ReceiptHandlerState) -> ReceiptHandlerState:
    return h.failure()


class ReceiptHandler(Actor):
    """Detects partial termination of one search protocol run.

    ``expect`` arrives synchronously (so forwarded branches are always
    accounted for before they can answer); receipts arrive asynchronously.
    On termination the owner gets ``searchTerminated``.
    """

    def __init__(self, owner: ActorRef, episode: Any):
        self.owner = owner
        self.episode = episode
        self.state = ReceiptHandlerState()

    def on_expect(self, msg: Message) -> str:
        self.state.expect(msg.n)
        self._maybe_report()
        return self.state.status

    def on_receipt(self, msg: Message) -> None:
        self.state._receipt(msg.ok)
        self._maybe_report()

    def _maybe_report(self) -> None:
        if self.state.terminal:
            self.send(self.owner, "searchTerminated", episode=self.episode, status=self.state.status)
