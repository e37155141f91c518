import pytest
import torch

FIXTURE_TEXT = {
    "aa": [
        "the river bends past the old mill",
        "seven lanterns hung above the door",
        "a quiet voice read the evening news",
        "the baker stacked warm loaves at dawn",
    ],
    "bb": [  # deliberately identical to aa: same content, different label
        "the river bends past the old mill",
        "seven lanterns hung above the door",
        "a quiet voice read the evening news",
        "the baker stacked warm loaves at dawn",
    ],
    "cc": [
        "kolme laivaa saapui satamaan illalla",
        "vanha kello kaikui torin yli",
        "kalastaja korjasi verkkoaan hiljaa",
        "lapset juoksivat pitkin rantakatua",
    ],
}


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """Randomly initialized byte-level encoder-decoder saved to disk.

    Built offline so the tests exercise the real load/score path without
    downloading weights; determinism and format checks do not need a
    trained model.
    """
    from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

    path = tmp_path_factory.mktemp("model") / "tiny-byte-t5"
    torch.manual_seed(1234)
    config = T5Config(
        vocab_size=384,
        d_model=32,
        d_kv=8,
        d_ff=64,
        num_layers=2,
        num_heads=2,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
        tie_word_embeddings=False,
    )
    model = T5ForConditionalGeneration(config)
    model.eval()
    ByT5Tokenizer().save_pretrained(path)
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def corpora_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpora")
    for lang, lines in FIXTURE_TEXT.items():
        (root / f"{lang}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root
