from probewatch.cnn.encoding import ImageEncoding, fit_encoding
from probewatch.cnn.network import CnnSpec, ConvLayerSpec, Network, cross_entropy
from probewatch.cnn.pgm import read_pgm, to_pgm, write_pgm
from probewatch.cnn.saliency import class_score, saliency
from probewatch.cnn.training import (
    CnnModel,
    EpochRecord,
    train_cnn,
    train_cnn_table,
    train_images,
)
