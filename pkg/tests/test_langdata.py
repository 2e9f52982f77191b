import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnn2dfa import langdata
from rnn2dfa.langdata import (
    ALL_PROBLEMS,
    GRAMMAR_PROBLEMS,
    Alphabet,
    SymbolStream,
    compact_to_indices,
    generate_long_string,
    generate_stream,
    indices_to_compact,
    make_problem,
    stream_from_text,
    stream_to_text,
    targets_to_compact,
)

TOMITA3_INPUT = "$baa$abaababbaabbaba$bbbbbaabbb$ab$$bab$abbbbabbaababbbb"
TOMITA3_OUTPUT = "11111100000000000000111111111111101111011010110111110101"
ADD4_INPUT1 = "$23111120100$332001$11010$03333120$23$320021$00321$21223"
ADD4_INPUT2 = "$31213111100$212030$03122$22113023$30$100213$22322$30120"
ADD4_OUTPUT = "01103033120001111310102320211132001101030230122210112300"


def test_tomita3_golden_output_string():
    gt = make_problem("tomita3")
    idx = compact_to_indices(gt, TOMITA3_INPUT)
    assert "".join(map(str, gt.label_indices(idx))) == TOMITA3_OUTPUT


def test_base4_addition_golden_output_string():
    gt = make_problem("add-base4")
    idx = compact_to_indices(gt, ADD4_INPUT1, ADD4_INPUT2)
    assert "".join(map(str, gt.label_indices(idx))) == ADD4_OUTPUT


class TestAlphabet:
    def test_separator_required(self):
        with pytest.raises(ValueError):
            Alphabet(("a", "b"))
        with pytest.raises(ValueError):
            Alphabet(("a", "$", "$"))

    def test_index_bijection(self):
        a = make_problem("add-base4").alphabet
        assert a.size == 17
        assert sorted(a.index(s) for s in a.symbols) == list(range(17))


class TestMakeProblem:
    def test_unknown_problem(self):
        with pytest.raises(ValueError, match="unknown problem"):
            make_problem("tomita8")

    def test_tomita1_short_strings(self):
        gt = make_problem("tomita1")
        assert list(gt.label_indices(compact_to_indices(gt, "$a"))) == [1, 1]
        assert list(gt.label_indices(compact_to_indices(gt, "$b"))) == [1, 0]

    def test_parity_minimal_dfa_two_states(self):
        assert make_problem("parity").minimal_dfa.n_states == 2

    @pytest.mark.parametrize("name", GRAMMAR_PROBLEMS)
    def test_labeler_matches_dfa_exhaustively(self, name):
        # all {a,b} strings up to length 12; separators covered separately
        # since both machines reset on $
        gt = make_problem(name)
        dfa = gt.minimal_dfa
        for n in range(1, 13):
            for bits in itertools.product((0, 1), repeat=n):
                assert list(gt.label_indices(bits)) == dfa.run(bits), (name, bits)

    @pytest.mark.parametrize("name", GRAMMAR_PROBLEMS)
    def test_labeler_matches_dfa_with_separators(self, name):
        gt = make_problem(name)
        rng = np.random.default_rng(7)
        for _ in range(300):
            s = rng.integers(3, size=rng.integers(1, 13))
            assert list(gt.label_indices(s)) == gt.minimal_dfa.run(s)

    @pytest.mark.parametrize("name", ALL_PROBLEMS)
    def test_separator_resets_both_machines(self, name):
        gt = make_problem(name)
        sep = gt.alphabet.separator_index
        rng = np.random.default_rng(3)
        for _ in range(50):
            prefix = list(rng.integers(gt.alphabet.size, size=6)) + [sep]
            suffix = list(rng.integers(gt.alphabet.size, size=6))
            with_prefix = gt.label_indices(prefix + suffix)[len(prefix):]
            bare = gt.label_indices([sep] + suffix)[1:]
            assert list(with_prefix) == list(bare)
            st = gt.minimal_dfa
            assert st.run(prefix + suffix)[len(prefix):] == st.run([sep] + suffix)[1:]

    def test_labeler_prefix_causality(self):
        gt = make_problem("tomita6")
        idx = compact_to_indices(gt, "$abba$ba")
        full = gt.label_indices(idx)
        for t in range(1, len(idx) + 1):
            assert gt.label_indices(idx[:t])[-1] == full[t - 1]

    @pytest.mark.parametrize("base", [2, 4])
    def test_addition_against_integer_arithmetic(self, base):
        gt = make_problem(f"add-base{base}")
        rng = np.random.default_rng(base)
        for _ in range(200):
            x, y = int(rng.integers(0, 10**6)), int(rng.integers(0, 10**6))
            n_digits = max(len(np.base_repr(x + y, base)), 1) + 1
            d1 = [(x // base**i) % base for i in range(n_digits)]
            d2 = [(y // base**i) % base for i in range(n_digits)]
            line1 = "$" + "".join(map(str, d1))
            line2 = "$" + "".join(map(str, d2))
            out = gt.label_indices(compact_to_indices(gt, line1, line2))
            total = sum(int(d) * base**i for i, d in enumerate(out[1:]))
            assert total == x + y
            assert out[0] == 0  # leading separator emits the (empty) carry

    def test_addition_carry_resets_after_separator(self):
        gt = make_problem("add-base2")
        # 1+1 leaves a pending carry, emitted at the $ and then cleared
        idx = compact_to_indices(gt, "$1$1", "$1$1")
        assert list(gt.label_indices(idx)) == [0, 0, 1, 0]


class TestGenerateStream:
    def test_relabeling_reproduces_targets(self):
        gt = make_problem("parity")
        s = generate_stream(gt, 10, 5, rng_seed=1)
        assert np.array_equal(gt.label_indices(s.inputs), s.targets)

    def test_starts_with_separator_and_segment_cap(self):
        gt = make_problem("tomita4")
        s = generate_stream(gt, 5000, 30, rng_seed=2)
        sep = gt.alphabet.separator_index
        assert s.inputs[0] == sep
        gaps = np.diff(np.flatnonzero(np.append(s.inputs, sep) == sep))
        assert gaps.max() <= 31  # at most 30 plain symbols between separators

    def test_deterministic_given_seed(self):
        gt = make_problem("add-base4")
        a = generate_stream(gt, 1000, 100, rng_seed=9)
        b = generate_stream(gt, 1000, 100, rng_seed=9)
        assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.targets, b.targets)

    def test_all_b_after_separator_never_accepted_by_bxa(self):
        gt = make_problem("bxa")
        idx = compact_to_indices(gt, "$" + "b" * 20)
        assert gt.label_indices(idx)[1:].max() == 0

    @given(st.integers(1, 400), st.integers(1, 50), st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_stream_invariants(self, n, max_segment, seed):
        gt = make_problem("tomita2")
        s = generate_stream(gt, n, max_segment, seed)
        assert len(s) == n
        assert s.inputs.min() >= 0 and s.inputs.max() < gt.alphabet.size
        assert s.targets.min() >= 0 and s.targets.max() < gt.output_classes

    def test_preconditions(self):
        gt = make_problem("parity")
        with pytest.raises(ValueError):
            generate_stream(gt, 0, 10)
        with pytest.raises(ValueError):
            generate_stream(gt, 10, 0)


class TestPositiveFrac:
    def test_zero_is_bit_identical_to_uniform(self):
        gt = make_problem("tomita2")
        a = generate_stream(gt, 4000, 50, 9)
        b = generate_stream(gt, 4000, 50, 9, positive_frac=0.0)
        assert np.array_equal(a.inputs, b.inputs)

    def test_enrichment_raises_accept_fraction(self):
        gt = make_problem("tomita2")
        uniform = generate_stream(gt, 20_000, 100, 9)
        rich = generate_stream(gt, 20_000, 100, 9, positive_frac=0.5)
        assert (rich.targets == 1).mean() > 2 * (uniform.targets == 1).mean()

    def test_deterministic(self):
        gt = make_problem("tomita5")
        a = generate_stream(gt, 5000, 60, 3, positive_frac=0.3)
        b = generate_stream(gt, 5000, 60, 3, positive_frac=0.3)
        assert np.array_equal(a.inputs, b.inputs)

    @pytest.mark.parametrize("problem", ["tomita2", "tomita4", "bxa"])
    def test_sampled_segments_are_accepted(self, problem):
        gt = make_problem(problem)
        dfa = gt.minimal_dfa
        sep = gt.alphabet.separator_index
        reach = langdata._accept_reach_table(dfa, sep, 40)
        rng = np.random.default_rng(17)
        for _ in range(50):
            seg = langdata._positive_segment(dfa, sep, reach, 40, rng)
            assert 1 <= len(seg) <= 40
            # the labeler, not the DFA, is the judge
            assert gt.labeler([sep, *seg]) == 1

    def test_reach_table_matches_language_parity(self):
        # nonempty strings of (ab)* have exactly the even lengths
        gt = make_problem("tomita2")
        sep = gt.alphabet.separator_index
        reach = langdata._accept_reach_table(gt.minimal_dfa, sep, 12)
        start = gt.minimal_dfa.transitions[gt.minimal_dfa.initial][sep]
        assert [k for k in range(1, 13) if reach[k][start]] == [2, 4, 6, 8, 10, 12]

    def test_rejected_for_transducers_and_bad_frac(self):
        with pytest.raises(ValueError):
            generate_stream(make_problem("add-base2"), 100, 10, 0, positive_frac=0.5)
        with pytest.raises(ValueError):
            generate_stream(make_problem("parity"), 100, 10, 0, positive_frac=1.5)


class TestGenerateLongString:
    def test_single_leading_separator(self):
        gt = make_problem("tomita3")
        s = generate_long_string(gt, 5000, rng_seed=4)
        sep = gt.alphabet.separator_index
        assert s.inputs[0] == sep
        assert np.sum(s.inputs == sep) == 1

    def test_minimum_length(self):
        gt = make_problem("tomita3")
        s = generate_long_string(gt, 2, rng_seed=0)
        assert len(s) == 2
        with pytest.raises(ValueError):
            generate_long_string(gt, 1)

    def test_parity_targets_match_independent_counter(self):
        gt = make_problem("parity")
        s = generate_long_string(gt, 2000, rng_seed=5)
        a_idx = gt.alphabet.index("a")
        running = np.cumsum(s.inputs == a_idx)
        expected = (running % 2 == 0).astype(int)
        assert np.array_equal(s.targets, expected)


class TestSerialization:
    def test_two_column_round_trip(self):
        gt = make_problem("add-base4")
        s = generate_stream(gt, 200, 20, rng_seed=3)
        back = stream_from_text(stream_to_text(s))
        assert np.array_equal(back.inputs, s.inputs)
        assert np.array_equal(back.targets, s.targets)
        assert back.alphabet.symbols == s.alphabet.symbols
        assert back.output_classes == s.output_classes

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            stream_from_text("nonsense\n")

    def test_compact_round_trip_grammar(self):
        gt = make_problem("tomita3")
        idx = compact_to_indices(gt, TOMITA3_INPUT)
        assert indices_to_compact(gt, idx) == [TOMITA3_INPUT]

    def test_compact_round_trip_addition(self):
        gt = make_problem("add-base4")
        idx = compact_to_indices(gt, ADD4_INPUT1, ADD4_INPUT2)
        assert indices_to_compact(gt, idx) == [ADD4_INPUT1, ADD4_INPUT2]
        s = SymbolStream(idx, gt.label_indices(idx), gt.alphabet, gt.output_classes)
        assert targets_to_compact(s) == ADD4_OUTPUT

    def test_misaligned_addition_separator_rejected(self):
        gt = make_problem("add-base2")
        with pytest.raises(ValueError, match="separator"):
            compact_to_indices(gt, "$1$", "$11")


def test_separator_probability_is_config_constant():
    assert 0 < langdata.SEPARATOR_PROB < 1
