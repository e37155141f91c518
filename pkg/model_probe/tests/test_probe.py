import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from model_probe.cli import main
from model_probe.probe import (
    ProbeConfig,
    ProbeError,
    _segments_by_sentinel,
    export_centroids,
    export_lm_records,
    load_scorer,
    span_corruption_pair,
)

# round-trip checks go through the feature toolkit's own ingestion
from langxfer.corpus import read_corpus
from langxfer.lm import aggregate_lm_records, plan_corpus_masks, read_lm_records, write_mask_plans
from langxfer.similarity import centroid_cosine, load_centroids


@pytest.fixture(scope="session")
def mask_plan_file(tmp_path_factory, corpora_dir):
    # plans come from the feature toolkit, exactly as in the real workflow
    out = tmp_path_factory.mktemp("plans") / "mask_plan.csv"
    plans = {}
    for lang in ("aa", "bb", "cc"):
        corpus = read_corpus(corpora_dir / f"{lang}.txt")
        plans[lang] = plan_corpus_masks(corpus, seed=13)
    write_mask_plans(plans, out, density=0.15, mean_span_len=3, seed=13)
    return out


def probe_config(corpora_dir, tmp_path, model, masks=None, **overrides):
    values = dict(
        model=model,
        corpora_dir=Path(corpora_dir),
        out_dir=tmp_path / "out",
        masks_path=masks,
        k=4,
        seed=13,
    )
    values.update(overrides)
    return ProbeConfig(**values)


def test_span_corruption_pair():
    words = ["w0", "w1", "w2", "w3", "w4", "w5"]
    input_text, target_text, gold = span_corruption_pair(words, [(1, 2), (4, 1)])
    assert input_text == "w0 <extra_id_0> w3 <extra_id_1> w5"
    assert target_text == "<extra_id_0> w1 w2 <extra_id_1> w4 <extra_id_2>"
    assert gold == [["w1", "w2"], ["w4"]]


def test_segment_parsing_and_exact_match_logic():
    # sentinels 90..92, eos 1
    gold = [90, 5, 6, 91, 7, 92, 1]
    assert _segments_by_sentinel(gold, [90, 91, 92], 1) == [[5, 6], [7]]
    pred_ok = [90, 5, 6, 91, 7, 92]
    assert _segments_by_sentinel(pred_ok, [90, 91, 92], 1) == [[5, 6], [7]]
    pred_wrong = [90, 5, 91, 7, 92]
    assert _segments_by_sentinel(pred_wrong, [90, 91, 92], 1) == [[5], [7]]
    assert _segments_by_sentinel([90, 5, 6], [90, 91, 92], 1) is None
    assert _segments_by_sentinel([91, 5, 90, 92], [90, 91, 92], 1) is None


def test_centroids_round_trip_and_self_cosine(tiny_checkpoint, corpora_dir, tmp_path):
    config = probe_config(corpora_dir, tmp_path, tiny_checkpoint)
    out_path = export_centroids(config)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        centroids = load_centroids(out_path)
    assert set(centroids) == {"aa", "bb", "cc"}
    dims = {c.vector.size for c in centroids.values()}
    assert len(dims) == 1
    # identical corpora under two labels: a language probed against itself
    assert centroid_cosine(centroids["aa"], centroids["bb"]) == pytest.approx(
        1.0, abs=1e-6
    )
    assert centroid_cosine(centroids["aa"], centroids["cc"]) < 1.0
    text = out_path.read_text(encoding="utf-8")
    assert "# k=4" in text
    assert "# seed=13" in text


def test_lm_records_round_trip(tiny_checkpoint, corpora_dir, tmp_path, mask_plan_file):
    config = probe_config(corpora_dir, tmp_path, tiny_checkpoint, masks=mask_plan_file)
    out_path = export_lm_records(config)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        records, meta = read_lm_records(out_path)
    assert meta["density"] == "0.15"
    assert meta["mean_span_len"] == "3"
    assert meta["seed"] == "13"
    assert {r.language for r in records} == {"aa", "bb", "cc"}
    assert all(r.loglik <= 0 and math.isfinite(r.loglik) for r in records)
    # every fixture sentence has tokens, so every sentence is scored
    assert len(records) == 12
    metrics = aggregate_lm_records(records)
    assert set(metrics) == {"aa", "bb", "cc"}


def test_same_sentence_scores_identically(tiny_checkpoint, corpora_dir):
    # greedy decoding is deterministic: rescoring the same input matches
    from model_probe.probe import score_sentence

    tokenizer, model = load_scorer(tiny_checkpoint)
    words = read_corpus(corpora_dir / "aa.txt").sentences[0].split()
    spans = [(1, 2), (5, 1)]
    first = score_sentence(tokenizer, model, words, spans)
    second = score_sentence(tokenizer, model, words, spans)
    assert first == second


def test_byte_identical_reruns(tiny_checkpoint, corpora_dir, tmp_path, mask_plan_file):
    config_a = probe_config(
        corpora_dir, tmp_path, tiny_checkpoint, masks=mask_plan_file,
        out_dir=tmp_path / "a",
    )
    config_b = probe_config(
        corpora_dir, tmp_path, tiny_checkpoint, masks=mask_plan_file,
        out_dir=tmp_path / "b",
    )
    for config in (config_a, config_b):
        export_centroids(config)
        export_lm_records(config)
    for name in ("centroids.tsv", "lm_records.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes()


def test_plan_id_mismatch_aborts(tiny_checkpoint, corpora_dir, tmp_path):
    bad_plan = tmp_path / "bad_plan.csv"
    bad_plan.write_text(
        "# density=0.15\n# mean_span_len=3\n# seed=0\n"
        "lang,sentence_id,start,length\naa,99,0,1\n",
        encoding="utf-8",
    )
    config = probe_config(corpora_dir, tmp_path, tiny_checkpoint, masks=bad_plan)
    with pytest.raises(ProbeError, match="99"):
        export_lm_records(config)


def test_span_out_of_bounds_aborts(tiny_checkpoint, corpora_dir, tmp_path):
    bad_plan = tmp_path / "oob_plan.csv"
    bad_plan.write_text(
        "lang,sentence_id,start,length\naa,0,5,40\n", encoding="utf-8"
    )
    config = probe_config(corpora_dir, tmp_path, tiny_checkpoint, masks=bad_plan)
    with pytest.raises(ProbeError, match="sentence 0"):
        export_lm_records(config)


def test_k_exceeding_corpus_errors(tiny_checkpoint, corpora_dir, tmp_path):
    config = probe_config(corpora_dir, tmp_path, tiny_checkpoint, k=50)
    with pytest.raises(ProbeError, match="k=50"):
        export_centroids(config)


def test_too_many_spans_for_sentinel_vocab(tiny_checkpoint, corpora_dir, tmp_path):
    # 130 single-token spans exceed the tokenizer's 125 sentinels
    long_corpus = tmp_path / "corpora"
    long_corpus.mkdir()
    (long_corpus / "aa.txt").write_text(
        " ".join(f"w{i}" for i in range(300)) + "\n", encoding="utf-8"
    )
    plan = tmp_path / "plan.csv"
    rows = ["lang,sentence_id,start,length"]
    rows += [f"aa,0,{2 * i},1" for i in range(130)]
    plan.write_text("\n".join(rows) + "\n", encoding="utf-8")
    config = probe_config(long_corpus, tmp_path, tiny_checkpoint, masks=plan)
    with pytest.raises(ProbeError, match="sentinels"):
        export_lm_records(config)


def test_model_load_failure(corpora_dir, tmp_path):
    config = probe_config(corpora_dir, tmp_path, str(tmp_path / "no_model"))
    with pytest.raises(ProbeError, match="cannot load model"):
        export_centroids(config)


def test_cli_end_to_end(tiny_checkpoint, corpora_dir, tmp_path, mask_plan_file, capsys):
    out = tmp_path / "cli_out"
    code = main([
        "--model", tiny_checkpoint,
        "--corpora", str(corpora_dir),
        "--masks", str(mask_plan_file),
        "--out", str(out),
        "--k", "4",
        "--seed", "13",
    ])
    assert code == 0
    assert (out / "centroids.tsv").is_file()
    assert (out / "lm_records.csv").is_file()


def test_cli_model_failure_exit_code(corpora_dir, tmp_path, capsys):
    code = main([
        "--model", str(tmp_path / "missing"),
        "--corpora", str(corpora_dir),
        "--out", str(tmp_path / "out"),
        "--k", "2",
    ])
    assert code == 2
    assert "cannot load model" in capsys.readouterr().err


def test_full_loop_into_feature_table(
    tiny_checkpoint, corpora_dir, tmp_path, mask_plan_file, capsys
):
    # probe outputs drive the toolkit's features command end to end
    from langxfer.cli import main as langxfer_main

    out = tmp_path / "loop"
    assert main([
        "--model", tiny_checkpoint,
        "--corpora", str(corpora_dir),
        "--masks", str(mask_plan_file),
        "--out", str(out),
        "--k", "4",
        "--seed", "13",
    ]) == 0
    code = langxfer_main([
        "features", "--task", "qa",
        "--corpora", str(corpora_dir),
        "--langs", "aa,bb,cc",
        "--centroids", str(out / "centroids.tsv"),
        "--lm-records", str(out / "lm_records.csv"),
        "--out", str(out),
    ])
    assert code == 0
    from langxfer.similarity import read_feature_table

    rows = read_feature_table(out / "features_qa.csv")
    assert len(rows) == 6
    for row in rows:
        # everything the probe feeds is populated; only s_src (which
        # needs observations) stays absent
        assert row.emb is not None
        assert row.lm_l_src is not None and row.lm_l_tgt is not None
        assert row.lm_em_src is not None and row.lm_em_tgt is not None
        assert row.s_src is None
