"""Exact enumeration engine: weight tables, partition functions, and the
factor-graph contraction of replica expectations against a direct-sum oracle."""

import math

import numpy as np
import pytest

from spinstab.engine import (AttachmentSpec, WeightTable,
                             build_weights, log_partition,
                             naive_replica_expectation, replica_expectation)
from spinstab.errors import CapacityError, UsageError
from spinstab.models import (DisorderSample, ModelSpec, hamiltonian,
                             sample_disorder, spins_of)
from spinstab.observables import (OverlapMonomial, OverlapPolynomial,
                                  canonicalize, parse_polynomial)
from spinstab.streams import DisorderStream


def _sk_disorder(seed, n):
    return sample_disorder(ModelSpec.sk(n), DisorderStream(seed), 0)


class TestWeightTable:
    def test_beta_zero_lambda_zero_all_weights_vanish(self):
        model = ModelSpec.sk(3)
        w = build_weights(model, _sk_disorder(0, 3), beta=0.0, lam=0.0)
        assert np.all(w.log_weights == 0.0)

    def test_lambda_zero_equals_minus_beta_energy(self):
        model = ModelSpec.sk(4)
        d = _sk_disorder(1, 4)
        w = build_weights(model, d, beta=0.8, lam=0.0)
        assert np.array_equal(w.log_weights, -0.8 * w.energies)

    def test_matches_per_config_formula(self):
        model = ModelSpec.sk(2)
        d = _sk_disorder(2, 2)
        w = build_weights(model, d, beta=0.5, lam=0.0)
        for code in range(4):
            direct = -0.5 * hamiltonian(model, d, spins_of(code, 2))
            assert abs(w.log_weights[code] - direct) <= 1e-15

    def test_negative_parameters_rejected(self):
        model = ModelSpec.sk(2)
        d = _sk_disorder(3, 2)
        with pytest.raises(UsageError):
            build_weights(model, d, beta=-0.1)
        with pytest.raises(UsageError):
            build_weights(model, d, beta=0.1, lam=-1.0)

    def test_enumeration_cap(self):
        model = ModelSpec.sk(21)
        d = sample_disorder(model, DisorderStream(0), 0)
        with pytest.raises(CapacityError):
            build_weights(model, d, beta=0.5)


class TestLogPartition:
    def test_infinite_temperature(self):
        model = ModelSpec.ea((2, 2), "periodic")
        w = build_weights(model, sample_disorder(model, DisorderStream(0), 0),
                          beta=0.0)
        assert log_partition(w) == pytest.approx(4 * math.log(2.0), abs=1e-12)

    def test_single_spin_constant_hamiltonian(self):
        # SK N=1: H = -J11, independent of the spin, so Z = 2 e^{beta J11}
        model = ModelSpec.sk(1)
        j11 = 1.7
        d = DisorderSample(main=np.array([[j11]]), perturbation=np.zeros((1, 1)))
        w = build_weights(model, d, beta=0.6)
        assert log_partition(w) == pytest.approx(math.log(2.0) + 0.6 * j11, abs=1e-12)

    def test_shift_invariance(self):
        model = ModelSpec.sk(4)
        d = _sk_disorder(4, 4)
        w = build_weights(model, d, beta=0.7)
        shifted = WeightTable(model, 0.7, 0.0, w.energies - 3.25 / 0.7,
                              w.perturbations)
        assert shifted.log_partition == pytest.approx(w.log_partition + 3.25,
                                                      abs=1e-10)


class TestReplicaExpectation:
    def test_constant_polynomial_is_normalized(self):
        model = ModelSpec.sk(4)
        w = build_weights(model, _sk_disorder(5, 4), beta=0.9, lam=0.2)
        assert replica_expectation(w, OverlapPolynomial.constant(1.0)) == \
            pytest.approx(1.0, abs=1e-14)

    def test_uniform_measure_mean_overlap(self):
        # at beta = 0 the spins are uniform, so <q12> = 1/N for SK
        for n in (3, 4, 6):
            model = ModelSpec.sk(n)
            w = build_weights(model, _sk_disorder(6, n), beta=0.0)
            assert replica_expectation(w, OverlapPolynomial.q(1, 2)) == \
                pytest.approx(1.0 / n, abs=1e-13)

    def test_matches_oracle_on_random_monomials(self):
        rng = np.random.default_rng(7)
        for model in (ModelSpec.sk(3), ModelSpec.sk(4), ModelSpec.ea((2, 2), "periodic")):
            stream = DisorderStream(8)
            for i in range(8):
                d = sample_disorder(model, stream, i)
                w = build_weights(model, d, beta=rng.uniform(0.1, 1.0),
                                  lam=rng.uniform(0.0, 0.5))
                factors = []
                for _ in range(rng.integers(1, 4)):
                    k = int(rng.integers(1, 5))
                    l = int(rng.integers(1, 5))
                    if k != l:
                        factors.append(((k, l), int(rng.integers(1, 3))))
                if not factors:
                    continue
                poly = OverlapPolynomial.from_monomial(
                    OverlapMonomial.of(factors), float(rng.normal()))
                fast = replica_expectation(w, poly)
                slow = naive_replica_expectation(w, poly)
                assert abs(fast - slow) <= 1e-12 * max(1.0, abs(slow))

    def test_three_cycle_monomial_matches_oracle(self):
        model = ModelSpec.sk(3)
        w = build_weights(model, _sk_disorder(9, 3), beta=0.6)
        poly = parse_polynomial("q1,2*q2,3*q1,3")
        fast = replica_expectation(w, poly)
        slow = naive_replica_expectation(w, poly)
        assert abs(fast - slow) <= 1e-12 * max(1.0, abs(slow))

    def test_exchangeability(self):
        # relabeling replicas leaves the expectation unchanged
        model = ModelSpec.sk(4)
        w = build_weights(model, _sk_disorder(10, 4), beta=0.5)
        raw = OverlapMonomial.of((((2, 4), 1), ((4, 3), 1)))
        a = replica_expectation(w, OverlapPolynomial.from_monomial(raw))
        b = replica_expectation(w, OverlapPolynomial.from_monomial(canonicalize(raw)))
        assert a == pytest.approx(b, abs=1e-13)

    def test_product_state_factorization(self):
        # disjoint replica pairs factorize under the product measure
        model = ModelSpec.sk(4)
        w = build_weights(model, _sk_disorder(11, 4), beta=0.8)
        q12 = replica_expectation(w, OverlapPolynomial.q(1, 2))
        q34 = replica_expectation(w, OverlapPolynomial.q(1, 2).times_q(3, 4))
        assert q34 == pytest.approx(q12 * q12, abs=1e-12)

    def test_attachment_matches_direct_sum(self):
        model = ModelSpec.sk(3)
        w = build_weights(model, _sk_disorder(12, 3), beta=0.7, lam=0.1)
        poly = OverlapPolynomial.q(1, 2)
        for replicas in ((1,), (2,), (1, 2)):
            attach = AttachmentSpec.energy(*replicas)
            fast = replica_expectation(w, poly, attach=attach)
            slow = naive_replica_expectation(w, poly, attach=attach)
            assert abs(fast - slow) <= 1e-12 * max(1.0, abs(slow))

    def test_elimination_cost_cap(self):
        model = ModelSpec.sk(12)
        w = build_weights(model, sample_disorder(model, DisorderStream(0), 0),
                          beta=0.3)
        # a fully-connected 4-replica monomial forces conditioning, whose
        # cost exceeds a tiny cap
        poly = parse_polynomial("q1,2*q1,3*q1,4*q2,3*q2,4*q3,4")
        with pytest.raises(CapacityError):
            replica_expectation(w, poly, cost_cap=2 ** 10)

    def test_naive_capacity(self):
        model = ModelSpec.sk(16)
        w = build_weights(model, sample_disorder(model, DisorderStream(0), 0),
                          beta=0.3)
        with pytest.raises(CapacityError):
            naive_replica_expectation(w, OverlapPolynomial.q(1, 2))
