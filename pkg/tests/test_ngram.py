import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special as sps

from surprise_stats.ngram import (
    PAD,
    Alphabet,
    AlphabetError,
    Dirichlet,
    NgramCounts,
    UnseenContextError,
    bayes_conditional,
    bayes_log_conditional,
    bayes_score,
    compat_score,
    count_ngrams,
    count_ngrams_sharded,
    log_estimate_from_counts,
    markov_g2,
    mle_conditional,
)
from surprise_stats.special import chi2_isf
from surprise_stats.tables import g2_test

AB = Alphabet.from_symbols("ab")
ACGT = Alphabet.from_symbols("ACGT")
BYTES = Alphabet.bytes()

sequences = st.text(alphabet="ab", max_size=60)


def grams_named(counts, m):
    return {"".join("φ" if i == PAD else counts.alphabet.symbols[i] for i in g): c
            for g, c in counts.grams[m].items() if c}


class TestAlphabet:
    def test_bytes_roundtrip(self):
        assert BYTES.size == 256
        assert BYTES.encode(b"\x00\xff") == [0, 255]
        assert BYTES.encode("é") == [0xC3, 0xA9]

    def test_tokens_unknown(self):
        a = Alphabet.tokens(["the", "cat"])
        ids = a.encode("the dog cat")
        assert a.decode(ids) == ["the", "<unk>", "cat"]

    def test_symbols_reject_unknown(self):
        with pytest.raises(AlphabetError):
            ACGT.encode("ACGN")

    def test_too_small(self):
        with pytest.raises(AlphabetError):
            Alphabet.from_symbols("a")

    def test_pad_not_a_symbol(self):
        assert PAD not in range(BYTES.size)

    def test_vocab_file(self, tmp_path):
        p = tmp_path / "vocab.txt"
        p.write_text("x\ny\n\nx\n")
        a = Alphabet.from_vocab_file(str(p))
        assert a.symbols == ("x", "y", "<unk>")


class TestCounting:
    def test_ab(self):
        c = count_ngrams("ab", 1, AB)
        assert grams_named(c, 2) == {"φa": 1, "ab": 1}
        assert grams_named(c, 1) == {"a": 1, "b": 1}

    def test_aaa(self):
        c = count_ngrams("aaa", 1, AB)
        assert grams_named(c, 2) == {"φa": 1, "aa": 2}

    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_empty(self, k):
        c = count_ngrams("", k, AB)
        assert c.length == 0
        assert all(sum(c.grams[m].values()) == 0 for m in c.grams)

    def test_pad_only_at_start(self):
        c = count_ngrams("abba" * 5, 3, AB)
        for m, table in c.grams.items():
            for g in table:
                # once a real symbol appears, no pad may follow
                first_real = next((i for i, x in enumerate(g) if x != PAD), len(g))
                assert all(x != PAD for x in g[first_real:])

    def test_negative_order(self):
        with pytest.raises(ValueError):
            count_ngrams("ab", -1, AB)

    @given(sequences, st.integers(0, 4))
    def test_totals(self, s, k):
        c = count_ngrams(s, k, AB)
        for m in range(1, k + 2):
            assert sum(c.grams[m].values()) == len(s) == c.total(m)

    @given(sequences, st.integers(0, 4))
    def test_context_marginals(self, s, k):
        c = count_ngrams(s, k, AB)
        for m in range(0, k + 1):
            for ctx, n in c.contexts[m].items():
                assert n == sum(c.gram_count(ctx + (x,)) for x in range(AB.size))

    @given(sequences, st.integers(0, 3))
    def test_padded_context_equals_lower_gram(self, s, k):
        # with padding, a length-j context count equals the j-gram count
        # wherever the context ends before the last position
        c = count_ngrams(s, k, AB)
        for j in range(1, k + 1):
            for ctx, n in c.contexts[j].items():
                if all(x == PAD for x in ctx):
                    continue
                assert n == c.gram_count(ctx) - (1 if s and tuple(([PAD] * k + AB.encode(s))[-j:]) == ctx else 0)

    @given(st.text(alphabet="ab", max_size=200), st.integers(0, 3), st.integers(1, 7))
    @settings(max_examples=60)
    def test_sharded_equals_serial(self, s, k, shards):
        assert count_ngrams_sharded(s, k, AB, shards=shards, workers=3) == count_ngrams(s, k, AB)

    def test_sharded_bytes(self):
        text = bytes(random.Random(1).randrange(256) for _ in range(5000))
        assert count_ngrams_sharded(text, 3, BYTES, shards=8) == count_ngrams(text, 3, BYTES)

    @given(sequences, sequences, sequences)
    @settings(max_examples=50)
    def test_merge_associative(self, a, b, c):
        ca, cb, cc = (count_ngrams(x, 2, AB) for x in (a, b, c))
        assert (ca + cb) + cc == ca + (cb + cc)
        assert ca + cb == cb + ca

    def test_merge_mismatch(self):
        with pytest.raises(ValueError):
            count_ngrams("ab", 1, AB) + count_ngrams("ab", 2, AB)

    def test_restricted(self):
        c = count_ngrams("abbab", 3, AB)
        assert c.restricted(1) == count_ngrams("abbab", 1, AB)


class TestSerialization:
    @given(sequences, st.integers(0, 3))
    @settings(max_examples=30)
    def test_roundtrip(self, s, k):
        c = count_ngrams(s, k, AB)
        again = NgramCounts.from_json(c.to_json())
        assert again == c
        assert all(+again.contexts[m] == +c.contexts[m] for m in c.contexts)

    def test_deterministic_text(self):
        a = count_ngrams(b"hello world", 2, BYTES).to_json()
        b = count_ngrams_sharded(b"hello world", 2, BYTES, shards=3).to_json()
        assert a == b
        assert '"format_version": 1' in a

    def test_tokens_roundtrip(self):
        alpha = Alphabet.tokens(["a", "b", "c"])
        c = count_ngrams("a b d c", 1, alpha)
        assert NgramCounts.from_json(c.to_json()) == c

    def test_bad_version(self):
        d = count_ngrams("ab", 1, AB).to_dict()
        d["format_version"] = 99
        with pytest.raises(ValueError):
            NgramCounts.from_dict(d)


class TestMLE:
    def test_examples(self):
        c = count_ngrams("aab", 1, AB)
        assert mle_conditional(c, "a", "a") == 0.5
        assert mle_conditional(c, "a", "b") == 0.5
        assert mle_conditional(c, "", "a") == pytest.approx(2 / 3)

    def test_unseen_context(self):
        c = count_ngrams("aaa", 1, AB)
        with pytest.raises(UnseenContextError):
            mle_conditional(c, "b", "a")

    def test_pad_context(self):
        c = count_ngrams("ab", 1, AB)
        assert mle_conditional(c, (PAD,), "a") == 1.0

    def test_context_too_long(self):
        with pytest.raises(ValueError):
            mle_conditional(count_ngrams("aab", 1, AB), "aa", "a")

    @given(st.text(alphabet="ACGT", min_size=1, max_size=80), st.integers(0, 3))
    def test_sums_to_one(self, s, k):
        c = count_ngrams(s, k, ACGT)
        for m in range(k + 1):
            for ctx in c.contexts[m]:
                total = math.fsum(mle_conditional(c, ctx, x) for x in range(4))
                assert total == pytest.approx(1.0, abs=1e-12)


class TestBayes:
    def test_uniform_unseen(self):
        c = count_ngrams("", 1, ACGT)
        assert bayes_conditional(c, "A", "C") == 0.25

    def test_add_one(self):
        c = count_ngrams("ab", 1, AB)
        # T(ab) = 1, T(a) = 1
        assert bayes_conditional(c, "a", "b") == pytest.approx(2 / 3)

    def test_unnormalized_dirichlet_example(self):
        c = NgramCounts(1, ACGT, grams={1: Counter({(0,): 10}), 2: Counter({(1, 0): 3, (1, 1): 7})}, length=10)
        prior = Dirichlet(2.0, {0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}, unnormalized=True)
        assert bayes_conditional(c, "C", "A", prior) == pytest.approx(0.19444, abs=5e-6)
        # default parameterization: pseudo-count alpha |S| m
        assert bayes_conditional(c, "C", "A", Dirichlet(2.0)) == pytest.approx(5 / 18)

    def test_bad_prior(self):
        with pytest.raises(ValueError):
            Dirichlet(-1.0)
        with pytest.raises(ValueError):
            Dirichlet(1.0, {0: 0.5, 1: 0.2})

    @given(st.text(alphabet="ACGT", max_size=60), st.integers(0, 2),
           st.floats(0.01, 10), st.lists(st.floats(0.01, 1), min_size=4, max_size=4))
    def test_sums_to_one(self, s, k, alpha, weights):
        c = count_ngrams(s, k, ACGT)
        tot = sum(weights)
        prior = Dirichlet(alpha, {i: w / tot for i, w in enumerate(weights)})
        for ctx in list(c.contexts[k]) + [(3,) * k]:
            total = math.fsum(bayes_conditional(c, ctx, x, prior) for x in range(4))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_dirichlet_matches_posterior_mean(self):
        # posterior mean of Beta(T_a + a m_a |S|, T_b + a m_b |S|) by quadrature
        c = count_ngrams("aababbbab", 0, AB)
        prior = Dirichlet(0.7, {0: 0.3, 1: 0.7})
        pa, pb = 0.7 * 2 * 0.3 + 4, 0.7 * 2 * 0.7 + 5
        num = integrate.quad(lambda p: p * p ** (pa - 1) * (1 - p) ** (pb - 1), 0, 1)[0]
        den = integrate.quad(lambda p: p ** (pa - 1) * (1 - p) ** (pb - 1), 0, 1)[0]
        assert bayes_conditional(c, "", "a", prior) == pytest.approx(num / den, rel=1e-8)


class TestBayesLog:
    def test_zero_counts(self):
        assert log_estimate_from_counts(0, 0, 2).exact == pytest.approx(-0.5, abs=1e-12)

    def test_large_counts(self):
        est = log_estimate_from_counts(10**6, 2 * 10**6, 4)
        assert abs(est.discrepancy) < 1e-5

    def test_scipy_oracle(self):
        for t, tc, size in [(0, 5, 3), (4, 9, 2), (17, 100, 256)]:
            est = log_estimate_from_counts(t, tc, size)
            assert est.exact == pytest.approx(sps.digamma(t + 2) - sps.digamma(tc + size + 1), abs=1e-12)

    def test_monotone(self):
        vals = [log_estimate_from_counts(t, 50, 4).exact for t in range(0, 51)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    @given(st.integers(1, 10**7), st.integers(0, 10**7), st.integers(2, 300))
    def test_converges(self, t, extra, size):
        est = log_estimate_from_counts(t, t + extra, size)
        assert abs(est.discrepancy) <= 1 / (2 * t) + 1e-12

    def test_from_counts(self):
        c = count_ngrams("aab", 1, AB)
        est = bayes_log_conditional(c, "a", "a")
        assert est.approx == pytest.approx(math.log(2 / 4))


def loaded(rng, n, p):
    return "".join("a" if rng.random() < p else "b" for _ in range(n))


class TestMarkovG2:
    def test_identical(self):
        c = count_ngrams("abbabaab", 2, AB)
        assert markov_g2(c, c, 2).statistic == 0.0

    @given(sequences, sequences)
    def test_k0_equals_unigram_g2(self, a, b):
        ca, cb = count_ngrams(a, 0, AB), count_ngrams(b, 0, AB)
        table = [[ca.gram_count((x,)) for x in range(2)], [cb.gram_count((x,)) for x in range(2)]]
        res = markov_g2(ca, cb, 0)
        if sum(map(sum, table)) and all(sum(r) for r in table) and all(table[0][j] + table[1][j] for j in range(2)):
            assert res.statistic == pytest.approx(g2_test(table).statistic, rel=1e-9, abs=1e-12)
        assert res.df == 1

    @given(sequences, sequences, st.integers(0, 3))
    def test_symmetric(self, a, b, k):
        ca, cb = count_ngrams(a, k, AB), count_ngrams(b, k, AB)
        assert markov_g2(ca, cb, k).statistic == markov_g2(cb, ca, k).statistic

    def test_df_formula(self):
        ca = count_ngrams("ACGTACGT", 2, ACGT)
        assert markov_g2(ca, ca, 2).df == 3 * 15
        assert markov_g2(ca, ca, 1).df == 3 * 3

    def test_contributions_sum(self):
        rng = random.Random(3)
        a = "".join(rng.choice("ACGT") for _ in range(300))
        b = "".join(rng.choice("AACGT") for _ in range(300))
        res = markov_g2(count_ngrams(a, 2, ACGT), count_ngrams(b, 2, ACGT), 2)
        assert math.fsum(res.contributions.values()) == res.statistic
        # 16 real contexts plus the padded ones (pad pad) and (pad x)
        assert 0 < res.effective_df <= 3 * (16 + 1 + 4)

    def test_order_too_low(self):
        with pytest.raises(ValueError):
            markov_g2(count_ngrams("ab", 1, AB), count_ngrams("ab", 1, AB), 2)

    def test_power_monte_carlo(self):
        rng = random.Random(11)
        crit = chi2_isf(1e-3, 1)
        hits = 0
        for _ in range(1000):
            a = count_ngrams(loaded(rng, 200, 0.9), 0, AB)
            b = count_ngrams(loaded(rng, 200, 0.5), 0, AB)
            hits += markov_g2(a, b, 0).statistic > crit
        assert hits >= 950


class TestCompatScore:
    def test_proportional_is_zero(self):
        test = count_ngrams("abab", 0, AB)
        train = count_ngrams("abab" * 25, 0, AB)
        assert compat_score(test, train, 0, alpha=1.0) == pytest.approx(0.0, abs=1e-12)

    def test_single_unseen_gram(self):
        test = NgramCounts(0, AB, grams={1: Counter({(0,): 1})}, length=1)
        train = NgramCounts(0, AB, grams={1: Counter({(1,): 100})}, length=100)
        assert compat_score(test, train, 0, alpha=1.0) == pytest.approx(2 * math.log(101), abs=5e-4)
        assert compat_score(test, train, 0, alpha=1.0) == pytest.approx(9.230, abs=5e-4)

    def test_large_alpha_limit(self):
        test = count_ngrams("aab", 1, AB)
        train = count_ngrams("bbbbbbba", 1, AB)
        assert abs(compat_score(test, train, 1, alpha=1e12)) < 1e-6

    def test_single_order_form(self):
        test = count_ngrams("ab", 0, AB)
        train = count_ngrams("abba", 0, AB)
        # k = 0: context totals are the string lengths, so both forms agree
        assert compat_score(test, train, 0, collapsed=False) == compat_score(test, train, 0)
        t1, t2 = count_ngrams("abb", 1, AB), count_ngrams("abab", 1, AB)
        assert compat_score(t1, t2, 1, collapsed=False) != compat_score(t1, t2, 1)

    def test_direct_formula(self):
        test = count_ngrams("abba", 1, AB)
        train = count_ngrams("aabbbabab", 1, AB)
        a = 0.2
        expected = 0.0
        for g, t in test.grams[2].items():
            tr = train.gram_count(g)
            expected += t * math.log(t * (a * 4 + 9) / (4 * (a * t + tr)))
        assert compat_score(test, train, 1, a) == pytest.approx(2 * expected, rel=1e-12)

    def test_errors(self):
        c = count_ngrams("ab", 1, AB)
        with pytest.raises(ValueError):
            compat_score(c, c, 1, alpha=0)
        with pytest.raises(ValueError):
            compat_score(count_ngrams("", 1, AB), c, 1)

    def test_mismatched_sources_score_higher(self):
        rng = random.Random(5)
        wins = 0
        for _ in range(1000):
            train_same = count_ngrams(loaded(rng, 400, 0.8), 0, AB)
            train_other = count_ngrams(loaded(rng, 400, 0.3), 0, AB)
            test = count_ngrams(loaded(rng, 40, 0.8), 0, AB)
            wins += compat_score(test, train_other, 0) > compat_score(test, train_same, 0)
        assert wins >= 990


class TestBayesScore:
    def test_unseen_byte(self):
        test = count_ngrams(b"a", 0, BYTES)
        train = NgramCounts(0, BYTES, length=0)
        assert bayes_score(test, train, 0, alpha=1.0) == pytest.approx(math.log(1 / 256))

    def test_monotone_in_train_count(self):
        test = count_ngrams("ab", 0, AB)
        prev = -math.inf
        for t in range(0, 10):
            train = NgramCounts(0, AB, grams={1: Counter({(0,): t, (1,): 10 - t})}, length=10)
            val = bayes_score(test, train, 0, alpha=1.0)
            # only the "a" term depends on t at fixed totals; compare that term
            term = math.log((1 + t) / (2 + 10))
            assert term > prev
            prev = term
            assert val == pytest.approx(term + math.log((1 + 10 - t) / 12))

    def test_posterior_mean_oracle(self):
        # product over test positions of posterior-mean p(x | ctx) under a
        # symmetric Beta(alpha, alpha) prior, integrated numerically
        alpha = 0.5
        train = count_ngrams("aabababbba", 1, AB)
        test = count_ngrams("abba", 1, AB)
        padded = [PAD] + AB.encode("abba")
        total = 0.0
        for i in range(1, len(padded)):
            ctx, x = (padded[i - 1],), padded[i]
            ta, tb = train.gram_count(ctx + (0,)), train.gram_count(ctx + (1,))
            f = (lambda p: p) if x == 0 else (lambda p: 1 - p)
            w = lambda p: p ** (alpha + ta - 1) * (1 - p) ** (alpha + tb - 1)
            num = integrate.quad(lambda p: f(p) * w(p), 0, 1)[0]
            den = integrate.quad(w, 0, 1)[0]
            total += math.log(num / den)
        assert bayes_score(test, train, 1, alpha) == pytest.approx(total, rel=1e-8)
