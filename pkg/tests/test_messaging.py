import numpy as np
import pytest

from coop_sampling.errors import BrokenRing, TransportError, WrongPayloadCount
from coop_sampling.messaging import CommMode, MessageTransport, PhaseTag


def payloads(n_robot, n_class=3):
    return [np.full(n_class, float(robot + 1)) for robot in range(n_robot)]


def keep(robot, others):
    """Provider that re-shares an unchanged payload."""
    return np.full(3, float(robot + 1))


# --- Broadcast ---


def test_broadcast_phase_costs_n_squared_minus_n():
    transport = MessageTransport(CommMode.BROADCAST, 20)
    transport.broadcast_actions(payloads(20))
    assert transport.sent_total == 380
    assert transport.sent_per_phase == [380]


def test_single_robot_sends_nothing():
    transport = MessageTransport(CommMode.BROADCAST, 1)
    delivered = transport.broadcast_actions(payloads(1))
    assert transport.sent_total == 0
    assert delivered == {0: {}}


def test_two_broadcast_phases_for_three_robots():
    transport = MessageTransport(CommMode.BROADCAST, 3)
    transport.broadcast_actions(payloads(3))
    transport.broadcast_actions(payloads(3), PhaseTag.SWEEP_SHARE)
    assert transport.sent_total == 12
    assert transport.phase_tags == [PhaseTag.INIT_SHARE, PhaseTag.SWEEP_SHARE]


def test_broadcast_delivers_every_other_payload():
    transport = MessageTransport(CommMode.BROADCAST, 3, keep_log=True)
    delivered = transport.broadcast_actions(payloads(3))
    assert sorted(delivered[1]) == [0, 2]
    np.testing.assert_array_equal(delivered[1][2], [3.0, 3.0, 3.0])
    assert len(transport.log) == 6
    assert {(message.sender, message.receiver) for message in transport.log} == {
        (s, r) for s in range(3) for r in range(3) if s != r
    }


def test_wrong_payload_count():
    transport = MessageTransport(CommMode.BROADCAST, 3)
    with pytest.raises(WrongPayloadCount):
        transport.broadcast_actions(payloads(2))


def test_negative_feasible_action_is_rejected():
    transport = MessageTransport(CommMode.BROADCAST, 2)
    with pytest.raises(TransportError):
        transport.broadcast_actions([np.array([1.0, -1.0]), np.array([0.0, 0.0])])


def test_broadcast_sweep_cost_and_views():
    transport = MessageTransport(CommMode.BROADCAST, 4)
    transport.share_initial(range(4), payloads(4))
    views = transport.sweep(range(4), keep)
    assert transport.sent_total == 2 * 12
    # Others' sum for robot 0 is 2 + 3 + 4.
    np.testing.assert_array_equal(views[0], [9.0, 9.0, 9.0])
    np.testing.assert_array_equal(transport.held_view(3), [6.0, 6.0, 6.0])


# --- Ring ---


def test_ring_sweep_costs_two_per_link():
    transport = MessageTransport(CommMode.RING, 20)
    transport.share_initial(range(20), payloads(20))
    assert transport.sent_total == 19
    transport.sweep(range(20), keep)
    assert transport.sent_per_phase == [19, 38]


def test_ring_sweep_with_two_robots():
    transport = MessageTransport(CommMode.RING, 2)
    transport.share_initial([0, 1], payloads(2))
    transport.ring_pass_sum([0, 1], keep)
    assert transport.sent_per_phase[-1] == 2


def test_ring_rejects_broken_order():
    transport = MessageTransport(CommMode.RING, 5)
    with pytest.raises(BrokenRing) as excinfo:
        transport.gather_to_head([0, 1, 2, 4], payloads(5))
    assert excinfo.value.missing == [3]


def test_ring_sweep_before_sharing():
    transport = MessageTransport(CommMode.RING, 3)
    with pytest.raises(TransportError):
        transport.ring_pass_sum(range(3), keep)


def test_ring_running_sum_sees_updates_in_order():
    transport = MessageTransport(CommMode.RING, 3)
    transport.share_initial([2, 0, 1], payloads(3))

    def double(robot, others):
        return np.full(3, 2.0 * (robot + 1))

    views = transport.ring_pass_sum([2, 0, 1], double)
    # Robot 2 goes first and sees the stale payloads of 0 and 1.
    np.testing.assert_array_equal(views[2], [3.0, 3.0, 3.0])
    # Robot 0 sees robot 2's update (6) and robot 1's stale payload (2).
    np.testing.assert_array_equal(views[0], [8.0, 8.0, 8.0])
    np.testing.assert_array_equal(views[1], [8.0, 8.0, 8.0])
    for robot in range(3):
        np.testing.assert_array_equal(transport.held_view(robot) + transport.own_payload(robot), [12.0, 12.0, 12.0])


def test_modes_agree_bitwise():
    rng = np.random.default_rng(9)
    initial = [rng.uniform(0, 5, 4) for _ in range(5)]
    updates = {robot: rng.uniform(0, 5, 4) for robot in range(5)}
    order = [3, 1, 4, 0, 2]
    seen = {}
    for mode in CommMode:
        transport = MessageTransport(mode, 5)
        transport.share_initial(order, initial)
        views = transport.sweep(order, lambda robot, others: updates[robot] + 1e-3 * others)
        seen[mode] = np.concatenate([views[robot] for robot in range(5)])
    np.testing.assert_array_equal(seen[CommMode.BROADCAST], seen[CommMode.RING])
