"""
Simulated inter-robot message passing with exact message accounting.

Robots share feasible actions v_i = P_i a_i. Two protocols are
supported:

- broadcast: every robot sends its payload to every other robot, so a
  share phase costs N^2 - N messages
- ring: robots send their initial payloads to the ring head (N - 1
  messages); afterwards only running sums travel along the ring, N - 1
  messages forward plus N - 1 to relay the closed sum back, 2 (N - 1)
  per sweep

A message is one payload vector from one sender to one receiver.
Delivery is synchronous and in order. Both protocols maintain the same
running aggregate with the same floating point operations in the same
order, so a sweep produces bitwise identical results under either one.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from coop_sampling.errors import BrokenRing, DimensionMismatch, TransportError, WrongPayloadCount

logger = logging.getLogger(__name__)

PAYLOAD_TOLERANCE = 1e-9

# (robot index, sum of the other robots' payloads) -> robot's new payload
PayloadProvider = Callable[[int, np.ndarray], np.ndarray]


class CommMode(str, Enum):
    BROADCAST = "broadcast"
    RING = "ring"


class PhaseTag(str, Enum):
    INIT_SHARE = "init-share"
    SWEEP_SHARE = "sweep-share"
    RING_SUM = "ring-sum"


@dataclass(frozen=True, eq=False)
class ActionMessage:
    sender: int
    receiver: int
    payload: np.ndarray
    phase_tag: PhaseTag


class MessageTransport:
    """
    Message counter and delivery bookkeeping for one fleet.

    Attributes:
        mode: broadcast or ring
        n_robot: fleet size; robots are addressed by index 0..n_robot-1
        sent_total: messages sent so far
        sent_per_phase: messages sent in each phase, in order
    """

    def __init__(self, mode: CommMode, n_robot: int, keep_log: bool = False):
        if n_robot < 1:
            raise TransportError("transport needs at least one robot", n_robot=n_robot)
        self.mode = CommMode(mode)
        self.n_robot = n_robot
        self.sent_total = 0
        self.sent_per_phase: List[int] = []
        self.phase_tags: List[PhaseTag] = []
        self.log: Optional[List[ActionMessage]] = [] if keep_log else None
        # What each robot last shared, as remembered by that robot.
        self._own: Dict[int, np.ndarray] = {}
        # The aggregate each robot currently holds.
        self._held: Dict[int, np.ndarray] = {}

    def __repr__(self):
        return f"<MessageTransport {self.mode.value} n_robot={self.n_robot} sent={self.sent_total}>"

    # --- Low level ---

    def _begin_phase(self, tag: PhaseTag) -> None:
        self.sent_per_phase.append(0)
        self.phase_tags.append(tag)

    def _send(self, sender: int, receiver: int, payload: np.ndarray, tag: PhaseTag) -> np.ndarray:
        if not np.all(np.isfinite(payload)):
            raise TransportError(f"robot {sender} sent a non-finite payload", sender=sender)
        if tag is not PhaseTag.RING_SUM and np.any(payload < -PAYLOAD_TOLERANCE):
            raise TransportError(f"robot {sender} shared a negative feasible action", sender=sender)
        self.sent_total += 1
        self.sent_per_phase[-1] += 1
        if self.log is not None:
            self.log.append(ActionMessage(sender, receiver, payload.copy(), tag))
        return payload

    def _check_order(self, fleet_order: Sequence[int]) -> List[int]:
        order = [int(robot) for robot in fleet_order]
        expected = set(range(self.n_robot))
        if len(order) != self.n_robot or set(order) != expected:
            missing = sorted(expected - set(order))
            raise BrokenRing(missing)
        return order

    def _check_payloads(self, payloads: Sequence[np.ndarray]) -> List[np.ndarray]:
        if len(payloads) != self.n_robot:
            raise WrongPayloadCount(self.n_robot, len(payloads))
        vectors = [np.asarray(payload, dtype=float) for payload in payloads]
        size = vectors[0].size
        for index, vector in enumerate(vectors):
            if vector.shape != (size,):
                raise DimensionMismatch(f"payloads[{index}]", size, vector.shape)
        return vectors

    @staticmethod
    def _ordered_sum(order: Sequence[int], vectors: Sequence[np.ndarray]) -> np.ndarray:
        total = vectors[order[0]].copy()
        for robot in order[1:]:
            total = total + vectors[robot]
        return total

    # --- Broadcast ---

    def broadcast_actions(
        self, payloads: Sequence[np.ndarray], tag: PhaseTag = PhaseTag.INIT_SHARE
    ) -> Dict[int, Dict[int, np.ndarray]]:
        """
        Every robot sends its payload to every other robot.

        Returns:
            delivery map receiver -> {sender: payload}
        """
        vectors = self._check_payloads(payloads)
        self._begin_phase(tag)
        delivered: Dict[int, Dict[int, np.ndarray]] = {robot: {} for robot in range(self.n_robot)}
        for sender, vector in enumerate(vectors):
            for receiver in range(self.n_robot):
                if receiver != sender:
                    delivered[receiver][sender] = self._send(sender, receiver, vector, tag)
        return delivered

    # --- Ring ---

    def gather_to_head(self, fleet_order: Sequence[int], payloads: Sequence[np.ndarray]) -> np.ndarray:
        """Every robot but the head sends its payload to the head; returns the head's total."""
        order = self._check_order(fleet_order)
        vectors = self._check_payloads(payloads)
        self._begin_phase(PhaseTag.INIT_SHARE)
        head = order[0]
        for robot in order[1:]:
            self._send(robot, head, vectors[robot], PhaseTag.INIT_SHARE)
        return self._ordered_sum(order, vectors)

    def ring_pass_sum(self, fleet_order: Sequence[int], local_payload_provider: PayloadProvider) -> Dict[int, np.ndarray]:
        """
        One sweep of running sums around the ring.

        Each robot receives the running total, subtracts its own stale
        payload, asks the provider for its new payload and forwards the
        updated total. The tail then relays the closed total back to the
        head so every robot holds it.

        Returns:
            per-robot view of the sum of the other robots' payloads
        """
        order = self._check_order(fleet_order)
        if not self._own:
            raise TransportError("ring sweep before the initial payloads were collected")
        self._begin_phase(PhaseTag.RING_SUM)
        running = self._held[order[0]]
        views: Dict[int, np.ndarray] = {}
        for position, robot in enumerate(order):
            if position > 0:
                running = self._send(order[position - 1], robot, running, PhaseTag.RING_SUM)
            others = running - self._own[robot]
            payload = np.asarray(local_payload_provider(robot, others), dtype=float)
            self._own[robot] = payload
            running = others + payload
            views[robot] = others
        for position in range(len(order) - 1, 0, -1):
            self._send(order[position], order[position - 1], running, PhaseTag.RING_SUM)
        for robot in order:
            self._held[robot] = running
        return views

    # --- Protocol-independent interface used by the interactive policy ---

    def share_initial(self, fleet_order: Sequence[int], payloads: Sequence[np.ndarray]) -> None:
        """Share the initial (greedy) payloads so every robot can form its aggregate."""
        order = self._check_order(fleet_order)
        vectors = self._check_payloads(payloads)
        if self.mode is CommMode.BROADCAST:
            delivered = self.broadcast_actions(vectors, PhaseTag.INIT_SHARE)
            for robot in range(self.n_robot):
                known = dict(delivered[robot])
                known[robot] = vectors[robot]
                self._held[robot] = self._ordered_sum(order, known)
        else:
            total = self.gather_to_head(order, vectors)
            # Only the head holds the total until the first sweep reaches the others.
            self._held = {order[0]: total}
        self._own = {robot: vectors[robot] for robot in range(self.n_robot)}
        logger.debug(f"Initial share complete: {self.sent_total} messages")

    def sweep(self, fleet_order: Sequence[int], provider: PayloadProvider) -> Dict[int, np.ndarray]:
        """One best-response sweep in the given order; returns each robot's view of the others' sum."""
        if self.mode is CommMode.RING:
            return self.ring_pass_sum(fleet_order, provider)

        order = self._check_order(fleet_order)
        if not self._own:
            raise TransportError("sweep before the initial payloads were shared")
        self._begin_phase(PhaseTag.SWEEP_SHARE)
        views: Dict[int, np.ndarray] = {}
        for robot in order:
            stale = self._own[robot]
            others = self._held[robot] - stale
            payload = np.asarray(provider(robot, others), dtype=float)
            self._own[robot] = payload
            self._held[robot] = others + payload
            views[robot] = others
            for receiver in range(self.n_robot):
                if receiver != robot:
                    self._send(robot, receiver, payload, PhaseTag.SWEEP_SHARE)
                    self._held[receiver] = (self._held[receiver] - stale) + payload
        return views

    def held_view(self, robot: int) -> np.ndarray:
        """Sum of the other robots' payloads as robot currently knows it."""
        return self._held[robot] - self._own[robot]

    def own_payload(self, robot: int) -> np.ndarray:
        return self._own[robot]
