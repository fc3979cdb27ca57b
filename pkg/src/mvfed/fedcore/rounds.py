"""Lock-step round orchestration shared by all federated protocols.

A protocol is a server object plus client objects:

    server.party                        PartyId
    server.broadcast(round) -> FedMessage | None
    server.aggregate(round, replies: list[FedMessage]) -> None
    server.done() -> bool               optional early stop
    client.party                        PartyId
    client.step(round, msg) -> FedMessage | None

Each round: the server's broadcast (if any) is sent to every client;
clients run their steps (optionally in parallel threads) and send
replies; after the barrier the server consumes replies in ascending
client id order.  All traffic flows through a transport, so the same
protocol code runs over in-process queues or the framed byte pipes.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from ..errors import PartyFailure
from .messages import FedMessage, MessageKind
from .wire import encode_message

__all__ = [
    "MessageRecord",
    "RoundRecord",
    "RoundLog",
    "run_rounds",
    "disallowed_kinds",
]


@dataclass(frozen=True)
class MessageRecord:
    sender: int
    receiver: int
    kind: MessageKind
    n_bytes: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    messages: tuple[MessageRecord, ...]
    seconds: float


@dataclass
class RoundLog:
    """Append-only per-round traffic record."""

    records: list[RoundRecord] = field(default_factory=list)

    def append(self, record: RoundRecord) -> None:
        self.records.append(record)

    @property
    def n_rounds(self) -> int:
        return len(self.records)

    def message_count(self) -> int:
        return sum(len(r.messages) for r in self.records)

    def message_kinds(self) -> set[MessageKind]:
        return {m.kind for r in self.records for m in r.messages}

    def bytes_sent_by(self, sender_id: int) -> int:
        return sum(
            m.n_bytes for r in self.records for m in r.messages if m.sender == sender_id
        )

    def total_bytes(self) -> int:
        return sum(m.n_bytes for r in self.records for m in r.messages)


def disallowed_kinds(log: RoundLog, allowed: Iterable[MessageKind]) -> set[MessageKind]:
    """Message kinds present in the log but absent from the allowlist."""
    return log.message_kinds() - set(allowed)


def run_rounds(
    server,
    clients: Sequence,
    transport,
    max_rounds: int,
    stop: Callable[[], bool] | None = None,
    parallel: bool = False,
    log: RoundLog | None = None,
) -> RoundLog:
    """Drive a protocol for up to max_rounds lock-step rounds.

    Stops early when `stop()` (or the server's own done(), if it has
    one) returns True after aggregation.  Client exceptions surface as
    PartyFailure carrying the round and party id.
    """
    log = log if log is not None else RoundLog()
    clients = sorted(clients, key=lambda c: c.party.id)
    server_ep = transport.endpoint(server.party)
    client_eps = {c.party.id: transport.endpoint(c.party) for c in clients}
    if stop is None and hasattr(server, "done"):
        stop = server.done

    def client_turn(client, rnd: int, expect_broadcast: bool):
        ep = client_eps[client.party.id]
        inbound = ep.receive(server.party) if expect_broadcast else None
        try:
            reply = client.step(rnd, inbound)
        except Exception as exc:
            raise PartyFailure(rnd, client.party.id, exc) from exc
        if reply is None:
            return None
        ep.send(server.party, reply)
        return MessageRecord(
            client.party.id, server.party.id, reply.kind, len(encode_message(reply))
        )

    for rnd in range(max_rounds):
        t0 = time.perf_counter()
        records: list[MessageRecord] = []
        broadcast = server.broadcast(rnd)
        if broadcast is not None:
            size = len(encode_message(broadcast))
            for client in clients:
                server_ep.send(client.party, broadcast)
                records.append(
                    MessageRecord(
                        server.party.id, client.party.id, broadcast.kind, size
                    )
                )
        expect = broadcast is not None
        if parallel and len(clients) > 1:
            with ThreadPoolExecutor(max_workers=len(clients)) as pool:
                futures = [
                    pool.submit(client_turn, c, rnd, expect) for c in clients
                ]
                results = [f.result() for f in futures]
        else:
            results = [client_turn(c, rnd, expect) for c in clients]
        replies = []
        for client, record in zip(clients, results):
            if record is None:
                continue
            records.append(record)
            replies.append(server_ep.receive(client.party))
        server.aggregate(rnd, replies)
        log.append(RoundRecord(rnd, tuple(records), time.perf_counter() - t0))
        if stop is not None and stop():
            break
    return log
