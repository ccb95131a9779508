from __future__ import annotations

import math
from math import fsum

import numpy as np
import pytest

from duelmem.information import (
    FiniteDistribution,
    InfiniteInformationWarning,
    distinctiveness_information,
    hebbian_information,
    hml_loss,
    imbalance_lambda,
    mhml_bound,
)
from duelmem.kernels import AffineCosine, ExponentialTemp, LabelOracle, normalize

LN2 = 0.6931471805599453


def _q(a, b, kernel, la=None, lb=None):
    """Scalar duplication probability, written independently of the library."""
    if isinstance(kernel, LabelOracle):
        return 1.0 if la == lb else 0.0
    s = min(1.0, max(-1.0, float(np.dot(a, b))))
    if isinstance(kernel, AffineCosine):
        return (1.0 + s) / 2.0
    return math.exp((s - 1.0) / kernel.tau)


def oracle_hebbian(anchor, anchor_label, dist, kernel):
    """I_h by direct enumeration over the anchor's class conditional."""
    idx = [i for i in range(dist.n_points) if dist.labels[i] == anchor_label]
    wc = fsum(dist.weights[i] for i in idx)
    terms = []
    for i in idx:
        q = _q(anchor, dist.embeddings[i], kernel, anchor_label, dist.labels[i])
        if q == 0.0 and dist.weights[i] > 0:
            return math.inf
        terms.append((dist.weights[i] / wc) * -math.log(q))
    return fsum(terms)


def oracle_distinctiveness(anchor, anchor_label, dist, kernel):
    """I_d by direct enumeration against the whole reference."""
    mean_q = fsum(
        dist.weights[i]
        * _q(anchor, dist.embeddings[i], kernel, anchor_label, dist.labels[i])
        for i in range(dist.n_points)
    )
    if mean_q == 0.0:
        return math.inf
    return -math.log(mean_q)


def oracle_hml(dist, kernel):
    """hml_loss by anchor-wise enumeration with fsum accumulation."""
    terms = []
    for i in range(dist.n_points):
        ih = oracle_hebbian(dist.embeddings[i], dist.labels[i], dist, kernel)
        idv = oracle_distinctiveness(
            dist.embeddings[i], dist.labels[i], dist, kernel
        )
        terms.append(dist.weights[i] * (ih - idv))
    return fsum(terms)


def _random_dist(rng, n_classes, per_class, z, uniform=True):
    emb = normalize(rng.normal(size=(n_classes * per_class, z)))
    labels = np.repeat(np.arange(n_classes), per_class)
    if uniform:
        return FiniteDistribution.uniform(emb, labels)
    w = rng.uniform(0.1, 1.0, size=len(labels))
    return FiniteDistribution(emb, labels, w / w.sum())


class TestFiniteDistribution:
    def test_uniform_weights(self):
        d = FiniteDistribution.uniform(np.eye(4), np.arange(4))
        assert np.allclose(d.weights, 0.25)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            FiniteDistribution(np.eye(2), np.arange(2), np.array([0.5, 0.6]))

    def test_weights_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            FiniteDistribution(np.eye(2), np.arange(2), np.array([1.5, -0.5]))

    def test_embeddings_must_be_unit(self):
        with pytest.raises(ValueError):
            FiniteDistribution.uniform(2.0 * np.eye(3), np.arange(3))

    def test_labels_must_align(self):
        with pytest.raises(ValueError):
            FiniteDistribution.uniform(np.eye(3), np.arange(2))

    def test_class_weight(self):
        d = FiniteDistribution(
            np.eye(3), np.array([0, 0, 1]), np.array([0.25, 0.25, 0.5])
        )
        assert d.class_weight(0) == 0.5
        assert d.class_weight(1) == 0.5

    def test_restriction_renormalizes(self):
        d = FiniteDistribution(
            np.eye(3), np.array([0, 0, 1]), np.array([0.2, 0.3, 0.5])
        )
        r = d.restricted_to_class(0)
        assert r.n_points == 2
        assert np.allclose(r.weights, [0.4, 0.6])


class TestHebbianInformation:
    def test_single_identical_positive_is_zero(self):
        d = FiniteDistribution.uniform(np.eye(2)[:1], np.zeros(1, int))
        assert hebbian_information(np.eye(2)[0], 0, d, AffineCosine()) == 0.0

    def test_two_positive_cosines_one_and_zero(self):
        # q = {exp(0), exp(-2)} at tau = 0.5; mean of -log q = (0 + 2)/2.
        anchor = np.array([1.0, 0.0])
        d = FiniteDistribution.uniform(np.eye(2), np.zeros(2, int))
        got = hebbian_information(anchor, 0, d, ExponentialTemp(tau=0.5))
        assert math.isclose(got, 1.0, abs_tol=1e-12)

    def test_matches_oracle_on_random_data(self):
        # The library takes the anchor's class conditional; the oracle takes
        # the full distribution and restricts internally.
        rng = np.random.default_rng(7)
        for kernel in (AffineCosine(), ExponentialTemp(tau=0.7)):
            d = _random_dist(rng, 3, 4, 6, uniform=False)
            for i in range(d.n_points):
                label = int(d.labels[i])
                got = hebbian_information(
                    d.embeddings[i], label, d.restricted_to_class(label), kernel
                )
                want = oracle_hebbian(d.embeddings[i], label, d, kernel)
                assert math.isclose(got, want, rel_tol=0, abs_tol=1e-12)

    def test_zero_probability_positive_warns_and_is_infinite(self):
        # Antipodal pair under the affine kernel: q = 0 exactly.
        anchor = np.array([1.0, 0.0])
        d = FiniteDistribution.uniform(np.array([[-1.0, 0.0]]), np.zeros(1, int))
        with pytest.warns(InfiniteInformationWarning):
            got = hebbian_information(anchor, 0, d, AffineCosine())
        assert got == math.inf


class TestDistinctivenessInformation:
    def test_frozen_two_point_reference(self):
        # Reference {e1, e2}, anchor e1, affine: mean q = (1 + 0.5)/2 = 0.75.
        d = FiniteDistribution.uniform(np.eye(2), np.arange(2))
        got = distinctiveness_information(np.eye(2)[0], d, AffineCosine())
        assert math.isclose(got, 0.2876820724517809, abs_tol=1e-15)

    def test_matches_oracle_on_random_data(self):
        rng = np.random.default_rng(8)
        for kernel in (AffineCosine(), ExponentialTemp(tau=1.3)):
            d = _random_dist(rng, 4, 3, 5, uniform=False)
            anchor = normalize(rng.normal(size=5))
            got = distinctiveness_information(anchor, d, kernel)
            want = oracle_distinctiveness(anchor, None, d, kernel)
            assert math.isclose(got, want, rel_tol=0, abs_tol=1e-12)

    def test_label_oracle_reads_class_mass(self):
        d = FiniteDistribution(
            np.eye(3), np.array([0, 0, 1]), np.array([0.45, 0.45, 0.1])
        )
        got = distinctiveness_information(
            np.eye(3)[2], d, LabelOracle(), anchor_label=1
        )
        assert math.isclose(got, -math.log(0.1), abs_tol=1e-12)

    def test_disjoint_class_is_infinite(self):
        d = FiniteDistribution.uniform(np.eye(2), np.zeros(2, int))
        with pytest.warns(InfiniteInformationWarning):
            got = distinctiveness_information(
                np.eye(2)[0], d, LabelOracle(), anchor_label=5
            )
        assert got == math.inf


class TestHmlLoss:
    def test_frozen_two_class_value(self):
        # {e1}, {e2} uniform, affine kernel: each anchor has I_h = 0 and
        # I_d = -log 0.75, so the loss is log 0.75.
        d = FiniteDistribution.uniform(np.eye(2), np.arange(2))
        got = hml_loss(d, AffineCosine())
        assert math.isclose(got, -0.2876820724517809, abs_tol=1e-15)

    @pytest.mark.parametrize("n_classes", [2, 3, 5, 10])
    def test_label_oracle_balanced_attains_optimum(self, n_classes):
        rng = np.random.default_rng(n_classes)
        d = _random_dist(rng, n_classes, 3, 8)
        got = hml_loss(d, LabelOracle())
        assert math.isclose(got, -math.log(n_classes), rel_tol=0, abs_tol=1e-9)

    def test_matches_oracle_on_random_data(self):
        rng = np.random.default_rng(9)
        for kernel in (AffineCosine(), ExponentialTemp(tau=0.5), LabelOracle()):
            d = _random_dist(rng, 3, 3, 7, uniform=False)
            assert math.isclose(
                hml_loss(d, kernel), oracle_hml(d, kernel), abs_tol=1e-12
            )

    def test_balanced_lower_bound_random_kernels(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            n_classes = int(rng.integers(2, 6))
            d = _random_dist(rng, n_classes, int(rng.integers(1, 4)), 4)
            for kernel in (AffineCosine(), ExponentialTemp(tau=0.9)):
                assert hml_loss(d, kernel) >= -math.log(n_classes) - 1e-9


class TestImbalanceLambda:
    def test_frozen_value(self):
        assert math.isclose(imbalance_lambda(10, 1.0 / 36.0), 3.6, abs_tol=1e-12)

    def test_balanced_is_one(self):
        assert math.isclose(imbalance_lambda(4, 0.25), 1.0, abs_tol=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            imbalance_lambda(0, 0.5)
        with pytest.raises(ValueError):
            imbalance_lambda(3, 0.0)


class TestMhmlBound:
    def _triple(self, rng, n_classes=3, per_class=3, z=6):
        emb = normalize(rng.normal(size=(n_classes * per_class, z)))
        labels = np.repeat(np.arange(n_classes), per_class)
        within = np.zeros(len(labels))
        for c in range(n_classes):
            mask = labels == c
            w = rng.uniform(0.2, 1.0, size=mask.sum())
            within[mask] = w / w.sum()
        rho = rng.uniform(0.05, 1.0, size=n_classes)
        rho = rho / rho.sum()
        oracle = FiniteDistribution(emb, labels, within / n_classes)
        empirical = FiniteDistribution(emb, labels, within * rho[labels])
        mem_emb = normalize(rng.normal(size=(5, z)))
        memory = FiniteDistribution.uniform(
            mem_emb, rng.integers(0, n_classes, size=5)
        )
        return empirical, memory, oracle, float(rho.min()), n_classes

    def test_dominates_balanced_loss(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            emp, mem, oracle, rho_min, c = self._triple(rng)
            for kernel in (AffineCosine(), ExponentialTemp(tau=0.6)):
                bound = mhml_bound(emp, mem, oracle, kernel, rho_min, c)
                assert bound >= hml_loss(oracle, kernel) - 1e-9

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(12)
        emp, mem, oracle, rho_min, c = self._triple(rng)
        kernel = AffineCosine()
        lam = imbalance_lambda(c, rho_min)
        ih = fsum(
            emp.weights[i]
            * oracle_hebbian(emp.embeddings[i], int(emp.labels[i]), emp, kernel)
            for i in range(emp.n_points)
        )
        id_mem = fsum(
            emp.weights[i]
            * oracle_distinctiveness(emp.embeddings[i], None, mem, kernel)
            for i in range(emp.n_points)
        )
        id_oracle = fsum(
            oracle.weights[i]
            * oracle_distinctiveness(oracle.embeddings[i], None, oracle, kernel)
            for i in range(oracle.n_points)
        )
        want = lam * ih - id_mem + abs(id_mem - id_oracle)
        got = mhml_bound(emp, mem, oracle, kernel, rho_min, c)
        assert math.isclose(got, want, rel_tol=0, abs_tol=1e-10)
