from droidseq.model import load_weights
from droidseq_trainer import parse_reference_file, read_corpus
from droidseq_trainer.cli import main


def test_generate_then_fit(tmp_path):
    corpus_path = tmp_path / "corpus.txt"
    assert main(["generate", "--out", str(corpus_path),
                 "--per-class", "30", "--min-len", "8", "--max-len", "12",
                 "--seed", "3"]) == 0
    assert len(read_corpus(corpus_path)) == 60

    model_path = tmp_path / "model.sqmw"
    refs_path = tmp_path / "refs.txt"
    assert main(["fit", str(corpus_path),
                 "--out", str(model_path), "--refs", str(refs_path),
                 "--length", "12", "--epochs", "1", "--seed", "3"]) == 0
    weights = load_weights(model_path.read_bytes())
    assert weights.fixed_length is None
    assert len(parse_reference_file(refs_path.read_text())) >= 20
