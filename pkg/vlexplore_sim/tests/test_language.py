"""
Tests for prompt templates, the embedding provider and encoded prompt databases.
"""

import logging
import os
import sys
import tempfile
import unittest

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

logging.basicConfig(level=logging.ERROR)

from vlexplore_sim.core.errors import (ConfigurationError, DimensionMismatchError, ProviderError,
                                       SectionParseError, TemplateParseError)
from vlexplore_sim.core.sections import Entry, parse_sections
from vlexplore_sim.language.embedding import EmbeddingProvider, HashEmbeddingProvider, normalize, tokenize
from vlexplore_sim.language.promptdb import (EncodedPromptDB, Polarity, PromptEntry, PromptSet, TemplateSpec,
                                             build_db, compile_prompt_set, db_from_texts, expand_templates,
                                             parse_template, parse_template_spec)

TEMPLATE_FILE = """
# target prompts
[templates]
A photo of a {} {}
[states]
brown|toy
[objects]
bear|teddy bear
[negative]
A photo with no context|texture|information
"""


class TestSections(unittest.TestCase):
    def test_entries_keep_positions(self):
        sections = parse_sections("[a]\n  first  # note\nkey value here\n[b]\n")
        self.assertEqual(sections["a"][0], Entry("first", 2, 3))
        self.assertEqual(sections["a"][1].key_value(), ("key", "value here"))
        self.assertEqual(sections["b"], [])

    def test_errors_carry_line(self):
        cases = ["orphan\n[a]\n", "[a]\n[a]\n", "[a\n", "[]\n"]
        for text in cases:
            with self.assertRaises(SectionParseError):
                parse_sections(text)
        with self.assertRaises(SectionParseError) as ctx:
            parse_sections("[a]\nx\n[zzz]\n", allowed=["a"])
        self.assertEqual(ctx.exception.line, 3)


class TestTemplateExpansion(unittest.TestCase):
    def test_states_and_objects(self):
        spec = TemplateSpec(top_level=["A photo of a {} {}"], states=["brown|toy"], objects=["bear|teddy bear"])
        self.assertEqual(expand_templates(spec), [
            "A photo of a brown bear",
            "A photo of a brown teddy bear",
            "A photo of a toy bear",
            "A photo of a toy teddy bear",
        ])

    def test_literal_alternatives(self):
        spec = TemplateSpec(top_level=["A photo with no context|texture|information"])
        self.assertEqual(expand_templates(spec), [
            "A photo with no context",
            "A photo with no texture",
            "A photo with no information",
        ])

    def test_inline_alternatives_split_per_word(self):
        spec = TemplateSpec(top_level=["A photo of a brown|toy bear"])
        self.assertEqual(expand_templates(spec), ["A photo of a brown bear", "A photo of a toy bear"])

    def test_grouped_phrase_alternatives(self):
        spec = TemplateSpec(top_level=["A photo of a (brown bear|teddy bear) on a {}"], objects=["desk"])
        self.assertEqual(expand_templates(spec), [
            "A photo of a brown bear on a desk",
            "A photo of a teddy bear on a desk",
        ])

    def test_parentheses_without_alternatives_stay_literal(self):
        spec = TemplateSpec(top_level=["A (blurry) photo"])
        self.assertEqual(expand_templates(spec), ["A (blurry) photo"])

    def test_markers_bind_innermost_levels(self):
        self.assertEqual(parse_template(Entry("x {}", 1, 1))[1], "objects")
        self.assertEqual([p for p in parse_template(Entry("{} {} {}", 1, 1)) if isinstance(p, str)],
                         ["descriptions", "states", "objects"])

    def test_named_markers(self):
        spec = TemplateSpec(top_level=["A {desc} photo of a {object}"], descriptions=["blurry"],
                            objects=["dog"])
        self.assertEqual(expand_templates(spec), ["A blurry photo of a dog"])

    def test_empty_level_collapses_whitespace(self):
        spec = TemplateSpec(top_level=["A photo of a {} {}"], objects=["bear"])
        self.assertEqual(expand_templates(spec), ["A photo of a bear"])

    def test_duplicates_keep_first_position(self):
        spec = TemplateSpec(top_level=["a {}", "b"], objects=["b|c"], raw_prompts=["b"])
        self.assertEqual(expand_templates(spec), ["a b", "a c", "b"])
        prompts = PromptSet(("x", "y", "x"), ())
        self.assertEqual(prompts.positive, ("x", "y"))

    def test_template_file(self):
        prompts = compile_prompt_set(parse_template_spec(TEMPLATE_FILE))
        self.assertEqual(len(prompts.positive), 4)
        self.assertEqual(len(prompts.negative), 3)

    def test_empty_prompt_set(self):
        with self.assertRaises(ConfigurationError):
            PromptSet((), ())


@pytest.mark.parametrize("template, column", [
    ("A {photo", 3),
    ("A photo}", 8),
    ("A {color} photo", 3),
    ("{} {} {} {}", 10),
    ("a||b", 3),
    ("a (b||c)", 6),
])
def test_template_errors_point_at_column(template, column):
    with pytest.raises(TemplateParseError) as info:
        parse_template(Entry(template, 4, 1))
    assert info.value.line == 4
    assert info.value.column == column


def test_template_file_errors_surface_at_load():
    with pytest.raises(TemplateParseError) as info:
        parse_template_spec("[templates]\nok\n  bad {\n")
    assert (info.value.line, info.value.column) == (3, 7)


class TestHashEmbedding(unittest.TestCase):
    def setUp(self):
        self.provider = HashEmbeddingProvider(dimension=512, seed=3)

    def test_protocol(self):
        self.assertIsInstance(self.provider, EmbeddingProvider)

    def test_deterministic_unit_vectors(self):
        first = self.provider.encode("A photo of a teddy bear")
        second = HashEmbeddingProvider(dimension=512, seed=3).encode("A photo of a teddy bear")
        self.assertTrue(np.array_equal(first, second))
        self.assertAlmostEqual(np.linalg.norm(first), 1.0)

    def test_shared_words_correlate(self):
        related = float(self.provider.encode("floor") @ self.provider.encode("a clear floor"))
        unrelated = float(self.provider.encode("floor") @ self.provider.encode("bookshelf"))
        self.assertGreater(related, 0.5)
        self.assertLess(abs(unrelated), 0.3)

    def test_stopwords_only(self):
        vector = self.provider.encode("a photo of the")
        self.assertAlmostEqual(np.linalg.norm(vector), 1.0)
        self.assertEqual(tokenize("A photo of the"), [])

    def test_bad_dimension(self):
        with self.assertRaises(ProviderError):
            HashEmbeddingProvider(dimension=0)

    def test_normalize_zero(self):
        self.assertTrue(np.array_equal(normalize(np.zeros(3)), np.zeros(3)))


class FailingProvider:
    dimension = 8

    def encode(self, text):
        if "bad" in text:
            raise RuntimeError("boom")
        return np.ones(self.dimension) / np.sqrt(self.dimension)


class ShortProvider:
    dimension = 8

    def encode(self, text):
        return np.ones(4)


class TestPromptDB(unittest.TestCase):
    def setUp(self):
        self.provider = HashEmbeddingProvider(dimension=64)
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_build_orders_positives_first(self):
        db = build_db(PromptSet(("teddy bear", "brown bear"), ("blank wall",)), self.provider)
        self.assertEqual(db.counts(), (2, 1))
        self.assertEqual([e.source_text for e in db.entries], ["teddy bear", "brown bear", "blank wall"])
        self.assertEqual(db.entries[2].polarity, Polarity.NEGATIVE)
        self.assertFalse(db.positive_matrix.flags.writeable)

    def test_provider_failures_name_the_prompt(self):
        with self.assertRaises(ProviderError) as ctx:
            build_db(PromptSet(("good", "bad prompt"), ()), FailingProvider())
        self.assertEqual(ctx.exception.prompt, "bad prompt")
        with self.assertRaises(ProviderError):
            build_db(PromptSet(("good",), ()), ShortProvider())

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            EncodedPromptDB(4, (PromptEntry(np.ones(3), Polarity.POSITIVE, "x"),))

    def test_save_and_load(self):
        db = db_from_texts(["A photo of a {} {}"], ["A photo with no context|texture"], self.provider,
                           TemplateSpec(states=["brown|toy"], objects=["bear|teddy bear"]))
        self.assertEqual(db.counts(), (4, 2))
        path = os.path.join(self.temp_dir.name, "target.db")
        db.save(path)
        loaded = EncodedPromptDB.load(path)
        self.assertEqual(loaded.dimension, 64)
        self.assertEqual([e.source_text for e in loaded.entries], [e.source_text for e in db.entries])
        self.assertEqual([e.polarity for e in loaded.entries], [e.polarity for e in db.entries])
        self.assertTrue(np.allclose(loaded.positive_matrix, db.positive_matrix, atol=1e-6))

    def test_bad_header(self):
        with self.assertRaises(ConfigurationError):
            EncodedPromptDB.loads("vectors\n")
        with self.assertRaises(ConfigurationError):
            EncodedPromptDB.loads("promptdb v1 D=4\nsideways AAAA x\n")


if __name__ == '__main__':
    unittest.main()
