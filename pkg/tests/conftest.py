import numpy as np
import pytest

from droidseq.model import (BILSTM_WIDTH, EMBEDDING_DIM, GATE_WIDTH,
                            LSTM_UNITS, ModelWeights)
from droidseq.pipeline import (Dictionary, DictKind, build_lookup_table)


def make_weights(vocab_size: int, rng: np.random.Generator,
                 scale: float = 0.1, fixed_length: int | None = None) -> ModelWeights:
    """Random but valid weights at the given scale (float32, dynamic by default)."""
    def t(*shape):
        return (rng.standard_normal(shape) * scale).astype(np.float32)

    return ModelWeights(
        embedding=t(vocab_size, EMBEDDING_DIM),
        fw_w_in=t(EMBEDDING_DIM, GATE_WIDTH),
        fw_w_rec=t(LSTM_UNITS, GATE_WIDTH),
        fw_bias=t(GATE_WIDTH),
        bw_w_in=t(EMBEDDING_DIM, GATE_WIDTH),
        bw_w_rec=t(LSTM_UNITS, GATE_WIDTH),
        bw_bias=t(GATE_WIDTH),
        bn_gamma=(1.0 + rng.standard_normal(BILSTM_WIDTH) * 0.05).astype(np.float32),
        bn_beta=t(BILSTM_WIDTH),
        bn_mean=t(BILSTM_WIDTH),
        bn_var=(0.5 + rng.random(BILSTM_WIDTH)).astype(np.float32),
        dense1_w=t(BILSTM_WIDTH, 64),
        dense1_b=t(64),
        dense2_w=t(64, 32),
        dense2_b=t(32),
        dense3_w=t(32, 2),
        dense3_b=t(2),
        fixed_length=fixed_length,
    )


def zero_weights(vocab_size: int = 4) -> ModelWeights:
    z = lambda *shape: np.zeros(shape, dtype=np.float32)
    return ModelWeights(
        embedding=z(vocab_size, EMBEDDING_DIM),
        fw_w_in=z(EMBEDDING_DIM, GATE_WIDTH),
        fw_w_rec=z(LSTM_UNITS, GATE_WIDTH),
        fw_bias=z(GATE_WIDTH),
        bw_w_in=z(EMBEDDING_DIM, GATE_WIDTH),
        bw_w_rec=z(LSTM_UNITS, GATE_WIDTH),
        bw_bias=z(GATE_WIDTH),
        bn_gamma=np.ones(BILSTM_WIDTH, dtype=np.float32),
        bn_beta=z(BILSTM_WIDTH),
        bn_mean=z(BILSTM_WIDTH),
        bn_var=np.ones(BILSTM_WIDTH, dtype=np.float32),
        dense1_w=z(BILSTM_WIDTH, 64),
        dense1_b=z(64),
        dense2_w=z(64, 32),
        dense2_b=z(32),
        dense3_w=z(32, 2),
        dense3_b=z(2),
    )


@pytest.fixture
def tiny_table():
    """Three small dictionaries with a known id layout."""
    perms = Dictionary(DictKind.PERMISSION, (
        "android.permission.SEND_SMS",
        "android.permission.INTERNET",
        "android.permission.READ_CONTACTS",
    ))
    intents = Dictionary(DictKind.INTENT, (
        "android.intent.action.BOOT_COMPLETED",
        "android.intent.action.CALL",
        "android.intent.category.LAUNCHER",
    ))
    apis = Dictionary(DictKind.API, (
        "Landroid/content/ContentResolver;->query",
        "Landroid/content/Intent;->setAction",
        "Landroid/telephony/SmsManager;->sendTextMessage",
        "Ljava/net/HttpURLConnection;->connect",
    ))
    return build_lookup_table(perms, intents, apis)
