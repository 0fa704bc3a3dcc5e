import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnomarket.market import (ASK, BID, NO_TRADE, MnoState, Order, clearinghouse_round,
                              generate_asks, generate_bids, orders_from_csv, orders_to_csv,
                              pmd_match, savings, welfare_oracle)
from mnomarket.reference import pmd_scan_reference, random_book, random_market

DL = 0.05


def book(bids, asks):
    return ([Order(i, BID, 1, v) for i, v in enumerate(bids)],
            [Order(10 + i, ASK, 1, v) for i, v in enumerate(asks)])


class TestPmd:
    def test_bid_below_ask(self):
        assert pmd_match(*book([5], [10])) == NO_TRADE

    def test_empty_books(self):
        assert pmd_match([], []).trade_count == 0
        assert pmd_match(*book([3, 2], [])).trade_count == 0

    def test_uniform_price(self):
        res = pmd_match(*book([10, 8, 6, 4], [2, 3, 5, 7]))
        assert res.trade_count == 3
        assert not res.reduced
        assert res.buyer_price == res.seller_price == 5.5
        assert res.auctioneer_surplus == 0

    def test_reduced_trade(self):
        res = pmd_match(*book([10, 8, 6, 4], [2, 3, 5, 9]))
        assert res.trade_count == 2 and res.reduced
        assert res.buyer_price == 6 and res.seller_price == 5
        assert res.auctioneer_surplus == 2
        assert [o.value for o in res.winning_bids] == [10, 8]
        assert [o.value for o in res.winning_asks] == [2, 3]

    def test_no_next_pair_falls_to_reduced(self):
        res = pmd_match(*book([10, 8], [2, 3]))
        assert res.trade_count == 1 and res.buyer_price == 8 and res.seller_price == 3

    def test_single_crossing_pair_without_next_trades_nothing(self):
        res = pmd_match(*book([10], [2]))
        assert res.trade_count == 0

    def test_order_of_input_is_irrelevant(self, rng):
        bids, asks = random_book(rng, quantum=1.0)
        a = pmd_match(bids, asks)
        b = pmd_match(list(reversed(bids)), asks[::-1])
        assert a == b

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([None, 0.5, 1.0]))
    def test_matches_scan_reference(self, seed, quantum):
        bids, asks = random_book(np.random.default_rng(seed), quantum=quantum)
        assert pmd_match(bids, asks) == pmd_scan_reference(bids, asks)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([None, 0.5]))
    def test_budget_balance_and_rationality(self, seed, quantum):
        res = pmd_match(*random_book(np.random.default_rng(seed), quantum=quantum))
        assert res.auctioneer_surplus >= 0
        assert len(res.winning_bids) == len(res.winning_asks) == res.trade_count
        assert all(o.value >= res.buyer_price for o in res.winning_bids)
        assert all(o.value <= res.seller_price for o in res.winning_asks)


class TestOrders:
    def test_zero_load_no_bids(self, curve):
        assert generate_bids(MnoState(0, 0.0, curve)) == []

    def test_single_unit_bid(self, curve):
        (b,) = generate_bids(MnoState(0, DL, curve))
        assert b.value == curve.energy[1]
        assert b.total_offload_marker

    def test_three_unit_bids(self, curve):
        bids = generate_bids(MnoState(0, 3 * DL, curve))
        e = curve.energy
        assert [b.value for b in bids] == [e[3] - e[2], e[2] - e[1], e[1] - 0.0]
        assert [b.total_offload_marker for b in bids] == [False, False, True]
        assert math.fsum(b.value for b in bids) == pytest.approx(e[3], rel=1e-14)

    def test_bid_total_with_transfer_energy(self, curve):
        bids = generate_bids(MnoState(0, 0.4, curve, e_tr=0.3))
        assert math.fsum(b.value for b in bids) == pytest.approx(curve.energy[8] - 8 * 0.3)

    def test_no_asks_at_capacity(self, curve):
        assert generate_asks(MnoState(0, 1.0, curve)) == []

    def test_first_ask_from_idle(self, curve):
        asks = generate_asks(MnoState(0, 0.0, curve))
        assert asks[0].value == curve.energy[1] - 58.6
        assert len(asks) == 20

    @pytest.mark.parametrize("units", range(0, 21))
    def test_asks_increase_and_dominate_bids(self, fine_curve, curve, units):
        for c in (curve, fine_curve):
            load = units * DL
            asks = [o.value for o in generate_asks(MnoState(0, load, c))]
            bids = [o.value for o in generate_bids(MnoState(0, load, c))
                    if not o.total_offload_marker]
            assert np.all(np.diff(asks) > 0)
            if asks and bids:
                assert asks[0] > max(bids)

    def test_asleep_operator_has_no_orders(self, curve):
        s = MnoState(0, 0.0, curve, awake=False)
        with pytest.raises(ValueError):
            generate_bids(s)
        with pytest.raises(ValueError):
            generate_asks(s)

    def test_off_grid_load_snaps(self, curve, caplog):
        caplog.set_level("WARNING", logger="mnomarket.market")
        assert len(generate_bids(MnoState(0, 0.42, curve))) == 8
        assert "snapped" in caplog.text

    def test_csv_round_trip(self, curve):
        s = MnoState(3, 0.35, curve, e_tr=0.125)
        orders = generate_bids(s) + generate_asks(s)
        text = orders_to_csv(orders)
        assert text.splitlines()[0] == "owner,side,unit_index,value_watts,total_offload_marker"
        assert orders_from_csv(text) == orders

    def test_csv_bad_side(self):
        with pytest.raises(ValueError):
            orders_from_csv("owner,side,unit_index,value_watts,total_offload_marker\n"
                            "0,buy,1,2.0,0\n")


def states(curve, loads, e_tr=0.0):
    return [MnoState(i, x, curve, e_tr=e_tr) for i, x in enumerate(loads)]


class TestClearinghouse:
    def test_high_equal_loads_with_transfer_cost(self, curve):
        out = clearinghouse_round(states(curve, [0.8, 0.8], e_tr=0.5))
        assert out.trade_units == 0 and not out.sleeping
        assert out.welfare == 0 and out.savings_pct == 0

    def test_low_equal_loads_one_sleeps(self, curve):
        mnos = states(curve, [0.1, 0.1])
        out = clearinghouse_round(mnos)
        best = welfare_oracle(mnos)
        assert len(out.sleeping) == 1
        assert out.welfare == pytest.approx(best.welfare, abs=1e-9)
        expect = 58.6 - (curve.energy[4] - 2 * curve.energy[2] + 58.6)
        assert out.welfare == pytest.approx(expect, abs=1e-9)
        assert out.allocation == {0: 2, 1: -2}

    def test_single_operator_cannot_trade(self, curve):
        out = clearinghouse_round(states(curve, [0.3]))
        assert out.trade_units == 0 and out.welfare == 0

    def test_duplicate_ids(self, curve):
        with pytest.raises(ValueError):
            clearinghouse_round([MnoState(0, 0.1, curve), MnoState(0, 0.2, curve)])

    def test_asleep_input_operator(self, curve):
        mnos = [MnoState(0, 0.0, curve, awake=False), MnoState(1, 0.3, curve),
                MnoState(2, 0.3, curve)]
        out = clearinghouse_round(mnos)
        assert out.allocation[0] == 0
        assert out.baseline_energy == pytest.approx(2 * curve.energy[6])

    def test_five_operators_high_load(self, fine_curve):
        out = clearinghouse_round(states(fine_curve, [0.99, 0.99, 0.99, 0.7, 0.5]))
        assert out.welfare > 0

    def test_savings_helper(self, curve):
        out = clearinghouse_round(states(curve, [0.2, 0.6]))
        assert savings(out.baseline_energy, out) == pytest.approx(out.savings_pct, rel=1e-12)
        no = clearinghouse_round(states(curve, [0.8, 0.8], e_tr=0.5))
        assert savings(no.baseline_energy, no) == 0.0
        with pytest.raises(ValueError):
            savings(0.0, out)

    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_infinitesimal_load_limit(self, fine_curve, m):
        out = clearinghouse_round(states(fine_curve, [0.01] * m))
        assert len(out.sleeping) == m - 1
        assert out.savings_pct == pytest.approx(100 * (m - 1) / m, abs=0.5)


def _check_outcome(out):
    alloc = out.allocation
    assert sum(v for v in alloc.values() if v > 0) == -sum(v for v in alloc.values() if v < 0)
    for i in out.sleeping:
        assert alloc[i] > 0 or out.post_loads[i] == 0
        assert out.post_loads[i] == 0
    post = out.post_energy + out.transfer_energy
    assert out.welfare == pytest.approx(out.baseline_energy - post, abs=1e-6)
    assert -1e-9 <= out.welfare
    assert math.fsum(out.payments.values()) >= -1e-9  # auctioneer never pays in


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_clearinghouse_against_oracle(self, seed):
        mnos = random_market(np.random.default_rng(seed))
        ch, best = clearinghouse_round(mnos), welfare_oracle(mnos)
        _check_outcome(ch)
        _check_outcome(best)
        assert ch.welfare <= best.welfare + 1e-9

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=2, max_size=4),
           st.sampled_from([0.0, 0.2, 1.0]))
    def test_outcome_invariants_real_curve(self, curve, units, e_tr):
        _check_outcome(clearinghouse_round(states(curve, [u * DL for u in units], e_tr)))

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=2, max_size=4))
    def test_individual_rationality_per_operator(self, curve, units):
        out = clearinghouse_round(states(curve, [u * DL for u in units]))
        for i, u in enumerate(units):
            before = curve.energy[u]
            after = 0.0 if i in out.sleeping else curve.energy[round(out.post_loads[i] / DL)]
            # net energy change including energy paid (+) or received (-)
            assert before - after - out.payments[i] >= -1e-9

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=2, max_size=4))
    def test_load_balancing(self, curve, units):
        out = clearinghouse_round(states(curve, [u * DL for u in units]))
        if out.sleeping:
            return
        post = [round(x / DL) for x in out.post_loads.values()]
        assert max(post) - min(post) <= 2

    def test_oracle_examples(self, curve):
        one = welfare_oracle(states(curve, [0.9, 0.0]))
        assert one.welfare > 0
        flat = welfare_oracle(states(curve, [0.8, 0.8], e_tr=0.5))
        assert flat.welfare == 0 and flat.trade_units == 0

    def test_oracle_cap(self, curve):
        with pytest.raises(ValueError):
            welfare_oracle(states(curve, [0.5] * 5), unit_cap=1000)
