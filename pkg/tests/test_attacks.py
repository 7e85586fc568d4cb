import math
import warnings

import numpy as np
import pytest

from dparena.attacks import (
    FingerprintInstance,
    MedianBinarySearchAdversary,
    binary_row_id,
    fingerprint_statistic,
    fingerprint_sum_statistic,
    is_approx_median,
    majority_overlap_bound,
    majority_vote,
    make_fingerprint_instance,
    median_query_budget,
    packing_dataset,
    reconstruction_hypotheses,
    run_fingerprint_experiment,
    run_median_search,
    run_reconstruction,
)
from dparena.core import Dataset, ParameterError, PrivacyWarning, ProtocolError, RandomSource
from dparena.mechanisms import (
    ExactAnswerer,
    FreshRandomizedResponse,
    IdentityAnswerer,
    LaplaceAnswerer,
    RandomizedResponse,
    UniformNoiseAnswerer,
)
from dparena.protocol import run_online
from dparena.queries import eval_statistical, is_prefix


class TestFingerprintInstance:
    def test_row_lengths(self):
        gen = RandomSource(81).generator()
        inst = make_fingerprint_instance(20, 5, gen)
        width = math.ceil(math.log2(20))
        assert all(len(row) == width + 5 for row in inst.dataset.rows)

    def test_query_sizes(self):
        gen = RandomSource(82).generator()
        inst = make_fingerprint_instance(16, 4, gen)
        assert all(len(q.strings) == 16 for q in inst.queries)

    def test_exact_answers_on_random_instances(self):
        # The exact statistical answer to query j is the +1 fraction of
        # column j, so its sign-scale twin is the column mean, exactly.
        gen = RandomSource(83).generator()
        for _ in range(100):
            n = int(gen.integers(2, 65))
            k = int(gen.integers(1, 17))
            inst = make_fingerprint_instance(n, k, gen)
            for j, q in enumerate(inst.queries):
                plus_fraction = float(np.count_nonzero(inst.columns[j] == 1)) / n
                assert eval_statistical(q, inst.dataset) == plus_fraction

    def test_prefix_crux_exhaustive(self):
        # z_{l,j} prefixes x_i exactly when l = i and column j of row i is +1.
        gen = RandomSource(84).generator()
        for n in (2, 7, 32):
            inst = make_fingerprint_instance(n, 3, gen)
            for j, q in enumerate(inst.queries):
                for l, z in enumerate(q.strings):
                    for i, row in enumerate(inst.dataset.rows):
                        expected = _same_identifier(z, row, n) and inst.columns[j, i] == 1
                        assert is_prefix(z, row) == expected

    def test_bias_symmetric(self):
        gen = RandomSource(85).generator()
        means = [make_fingerprint_instance(16, 8, gen).bias.mean() for _ in range(200)]
        # bias ~ U[-1,1]: the grand mean concentrates around 0.
        assert abs(np.mean(means)) <= 3 * (1 / math.sqrt(3)) / math.sqrt(200 * 8)

    def test_binary_row_id_unique(self):
        ids = {binary_row_id(i, 5) for i in range(1, 33)}
        assert len(ids) == 32

    def test_small_instance_rejected(self):
        with pytest.raises(ParameterError):
            make_fingerprint_instance(1, 3, RandomSource(0).generator())


def _same_identifier(z, row, n):
    width = math.ceil(math.log2(n))
    return z.signs()[:width] == row.signs()[:width]


class TestFingerprintStatistic:
    def test_zero_answers_zero_statistic(self):
        inst = make_fingerprint_instance(8, 4, RandomSource(86).generator())
        stat = fingerprint_statistic([0.0] * 4, inst, 0)
        assert stat.z == 0.0
        assert np.all(stat.per_row == 0.0)

    def test_single_query_formula(self):
        # Z = a * (c - p) = 1 * (1 - 0.25).
        inst = FingerprintInstance(
            bias=np.array([0.25]),
            columns=np.array([[1, -1]], dtype=np.int8),
            dataset=make_fingerprint_instance(2, 1, RandomSource(0).generator()).dataset,
            queries=make_fingerprint_instance(2, 1, RandomSource(0).generator()).queries,
        )
        stat = fingerprint_statistic([1.0], inst, 0)
        assert stat.z == pytest.approx(0.75)

    def test_argmax_returned(self):
        inst = make_fingerprint_instance(16, 6, RandomSource(87).generator())
        answers = inst.exact_sign_answers()
        stat = fingerprint_statistic(answers, inst, 3)
        assert stat.per_row[stat.argmax] == stat.per_row.max()

    def test_sum_statistic_matches_row_sum(self):
        inst = make_fingerprint_instance(16, 6, RandomSource(88).generator())
        answers = inst.exact_sign_answers()
        stat = fingerprint_statistic(answers, inst, 0)
        assert fingerprint_sum_statistic(answers, inst) == pytest.approx(stat.per_row.sum())

    def test_summed_statistic_separates_accurate_from_noisy(self):
        # Near-exact answers track the columns, so the summed statistic
        # averages (2/3)k; heavily noised answers are independent of the
        # columns and average zero.
        n, k, runs = 32, 24, 40
        signal = (2.0 / 3.0) * k

        def mean_stat(eps_per_query, base_seed):
            total = 0.0
            for r in range(runs):
                rng = RandomSource(base_seed, r)
                inst = make_fingerprint_instance(n, k, rng.generator(5))
                transcript, _ = run_fingerprint_experiment(
                    LaplaceAnswerer(eps_per_query), inst, rng
                )
                from dparena.attacks import to_sign_scale

                answers = to_sign_scale([float(a) for a in transcript.answers()])
                total += fingerprint_sum_statistic(answers, inst)
            return total / runs

        assert mean_stat(1000.0, 89) >= signal / 2
        assert abs(mean_stat(0.001, 90)) <= signal / 2


class TestReconstruction:
    def test_identity_mechanism_reconstructs_exactly(self):
        gen = RandomSource(91).generator()
        x = Dataset.sign_bits(gen.integers(0, 2, size=200, dtype=np.int8) * 2 - 1)
        run = run_reconstruction(IdentityAnswerer(), x, 0.5, k=7, rng=RandomSource(92))
        assert np.array_equal(run.reconstruction, x.rows)
        assert run.overlap == 200

    def test_fresh_rr_majority_recovers(self):
        gen = RandomSource(93).generator()
        n = 2000
        x = Dataset.sign_bits(gen.integers(0, 2, size=n, dtype=np.int8) * 2 - 1)
        run = run_reconstruction(FreshRandomizedResponse(0.5), x, 0.5, k=60, rng=RandomSource(94))
        assert run.overlap >= 0.9 * n

    def test_reused_release_breaks_on_second_query(self):
        gen = RandomSource(95).generator()
        n = 100_000
        x = Dataset.sign_bits(gen.integers(0, 2, size=n, dtype=np.int8) * 2 - 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PrivacyWarning)
            run = run_reconstruction(RandomizedResponse(0.5), x, 0.5, k=2, rng=RandomSource(96))
        q2, a2 = run.transcript.pairs[1]
        from dparena.queries import correlated_loss

        assert correlated_loss(q2, x, a2) == 1

    def test_default_query_count(self):
        gen = RandomSource(97).generator()
        x = Dataset.sign_bits(gen.integers(0, 2, size=100, dtype=np.int8) * 2 - 1)
        run = run_reconstruction(IdentityAnswerer(), x, 0.5, rng=RandomSource(98))
        assert len(run.answers) == math.ceil(100 / 0.5**2)

    def test_non_vector_answer_rejected(self):
        from dparena.protocol import Mechanism

        class ScalarAnswerer(Mechanism):
            def answer(self, query):
                return 0.5

        x = Dataset.sign_bits([1, -1, 1])
        with pytest.raises(ProtocolError):
            run_reconstruction(ScalarAnswerer(), x, 0.5, k=3, rng=RandomSource(99))

    def test_online_engine_rejects_reconstruction(self):
        # The separation made executable: the adversary cannot pre-commit.
        from dparena.attacks import ReconstructionAdversary
        from dparena.protocol import run_offline

        x = Dataset.sign_bits([1, -1, 1, 1])
        adversary = ReconstructionAdversary(0.5, 2)
        with pytest.raises(ProtocolError):
            run_online(IdentityAnswerer(), adversary, x, 2, RandomSource(1))
        with pytest.raises(ProtocolError):
            run_offline(IdentityAnswerer(), ReconstructionAdversary(0.5, 2), x, 2, RandomSource(1))

    def test_ties_vote_positive(self):
        answers = [np.array([1, -1], dtype=np.int8), np.array([-1, 1], dtype=np.int8)]
        assert np.array_equal(majority_vote(answers), np.array([1, 1], dtype=np.int8))


class TestMajorityOverlapBound:
    def test_attack_regime_arithmetic(self):
        # a = 99a/100, b = 51a^2/50, k = 100/a^2 gives a coefficient >= 0.89
        # after the alpha factors cancel.
        for alpha in (0.1, 0.25, 0.5):
            a = 0.99 * alpha
            b = 1.02 * alpha**2
            k = math.ceil(100 / alpha**2)
            assert majority_overlap_bound(a, b, k) >= 0.89

    def test_limit_is_one(self):
        assert majority_overlap_bound(0.5, 0.25, 10**18) == pytest.approx(1.0, abs=1e-9)

    def test_brute_force_never_violated(self):
        # Sampled sign-vector triples: whenever the empirical hypotheses
        # hold, the majority overlap respects the bound.
        gen = RandomSource(100).generator()
        n, k = 12, 3
        checked = 0
        for _ in range(10_000):
            ys = gen.integers(0, 2, size=(k, n), dtype=np.int8) * 2 - 1
            x = gen.integers(0, 2, size=n, dtype=np.int8) * 2 - 1
            a, b = reconstruction_hypotheses(list(ys), x)
            if not (0.0 < a <= 1.0 and 0.0 <= b <= 1.0):
                continue
            checked += 1
            overlap = int(majority_vote(list(ys)).astype(int) @ x.astype(int))
            assert overlap >= majority_overlap_bound(a, b, k) * n - 1e-9
        assert checked > 100

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            majority_overlap_bound(0.0, 0.5, 10)
        with pytest.raises(ParameterError):
            majority_overlap_bound(0.5, 1.5, 10)
        with pytest.raises(ParameterError):
            majority_overlap_bound(0.5, 0.5, 0)


class TestMedianSearch:
    def test_hand_traced_example(self):
        # Dataset of 50 copies of 7 on {1..16}.  Trace: bracket (0,16) ->
        # query 8 (frac 1 -> go left), (0,8) -> query 4 (frac 0 -> right),
        # (4,8) -> query 6 (frac 0 -> right), (6,8) -> query 7 (frac 1 ->
        # left), bracket (6,7) closes: output 7 after 4 queries.
        x = Dataset.unit_reals([7 / 16] * 50)
        res = run_median_search(ExactAnswerer(), x, 16, rng=RandomSource(1))
        assert res.median == 7
        assert res.query_count == 4

    def test_exact_answers_give_exact_medians(self):
        gen = RandomSource(102).generator()
        for trial in range(1000):
            domain = 1024
            values = gen.integers(1, domain + 1, size=50)
            x = Dataset.unit_reals(values / domain)
            res = run_median_search(ExactAnswerer(), x, domain, rng=RandomSource(103, trial))
            assert res.query_count <= median_query_budget(domain)
            assert is_approx_median(x, res.median / domain, 0.0)

    def test_noisy_answers_give_approx_medians(self):
        gen = RandomSource(104).generator()
        for trial in range(1000):
            domain = 256
            values = gen.integers(1, domain + 1, size=40)
            x = Dataset.unit_reals(values / domain)
            res = run_median_search(UniformNoiseAnswerer(0.05), x, domain, rng=RandomSource(105, trial))
            assert res.query_count <= median_query_budget(domain)
            assert is_approx_median(x, res.median / domain, 0.05)

    def test_budget_value(self):
        assert median_query_budget(16) == 5
        assert median_query_budget(1024) == 11

    def test_adversary_stops_cleanly(self):
        adv = MedianBinarySearchAdversary(4)
        q1 = adv.next_query(())
        q2 = adv.next_query(((q1, 1.0),))
        done = adv.next_query(((q1, 1.0), (q2, 1.0)))
        assert done is None
        assert adv.result == 1
        assert adv.next_query(()) is None


class TestPackingDataset:
    def test_multiplicities(self):
        x = packing_dataset(16, 7, 50, 0.1)
        m = math.ceil(0.4 * 50) - 1
        values = np.asarray(x.rows)
        assert np.count_nonzero(values == 1 / 16) == m
        assert np.count_nonzero(values == 1.0) == m
        assert np.count_nonzero(values == 7 / 16) == 50 - 2 * m
        assert 50 - 2 * m >= 1

    def test_t_is_unique_approx_median(self):
        domain, n, alpha = 16, 50, 0.1
        x = packing_dataset(domain, 7, n, alpha)
        m = math.ceil((0.5 - alpha) * n) - 1
        threshold_alpha = 0.5 - m / n - 1e-9
        medians = [
            t for t in range(1, domain + 1) if is_approx_median(x, t / domain, threshold_alpha)
        ]
        assert medians == [7]

    def test_exact_search_recovers_every_t(self):
        # The query sequence is the same for every t until it pins t down.
        domain = 64
        for t in range(1, domain + 1):
            x = packing_dataset(domain, t, 1000, 0.1)
            res = run_median_search(ExactAnswerer(), x, domain, rng=RandomSource(106, t))
            assert res.median == t

    def test_degenerate_rejected(self):
        with pytest.raises(ParameterError):
            packing_dataset(16, 20, 50, 0.1)  # t outside the domain
        with pytest.raises(ParameterError):
            packing_dataset(16, 7, 4, 0.6)  # extreme-copy count goes negative
