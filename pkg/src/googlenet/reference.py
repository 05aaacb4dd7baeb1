"""Published per-layer reference figures for the full-size network.

These are the printed "params" / "ops" values and output sizes from the
original per-layer table (the ``table1`` that `count --compare-table1`
refers to), stored at their printed precision: "159K" -> 159_000,
"128M" -> 128_000_000.  The audit in :mod:`googlenet.accounting` diffs
computed counts against these.
"""

# (block id, printed row label, params, multiply-adds); None = cell empty
TABLE1 = (
    ("conv1", "convolution 7x7/2", 2_700, 34_000_000),
    ("maxpool1", "max pool 3x3/2", None, None),
    ("conv2", "convolution 3x3/1", 112_000, 360_000_000),
    ("maxpool2", "max pool 3x3/2", None, None),
    ("inception_3a", "inception (3a)", 159_000, 128_000_000),
    ("inception_3b", "inception (3b)", 380_000, 304_000_000),
    ("maxpool3", "max pool 3x3/2", None, None),
    ("inception_4a", "inception (4a)", 364_000, 73_000_000),
    ("inception_4b", "inception (4b)", 437_000, 88_000_000),
    ("inception_4c", "inception (4c)", 463_000, 100_000_000),
    ("inception_4d", "inception (4d)", 580_000, 119_000_000),
    ("inception_4e", "inception (4e)", 840_000, 170_000_000),
    ("maxpool4", "max pool 3x3/2", None, None),
    ("inception_5a", "inception (5a)", 1_072_000, 54_000_000),
    ("inception_5b", "inception (5b)", 1_388_000, 71_000_000),
    ("avgpool", "avg pool 7x7/1", None, None),
    ("dropout", "dropout (40%)", None, None),
    ("linear", "linear", 1_000_000, 1_000_000),
    ("softmax", "softmax", None, None),
)

# (block id, (channels, height, width)) for a 224x224 input
OUTPUT_SIZES = (
    ("conv1", (64, 112, 112)),
    ("maxpool1", (64, 56, 56)),
    ("conv2", (192, 56, 56)),
    ("maxpool2", (192, 28, 28)),
    ("inception_3a", (256, 28, 28)),
    ("inception_3b", (480, 28, 28)),
    ("maxpool3", (480, 14, 14)),
    ("inception_4a", (512, 14, 14)),
    ("inception_4b", (512, 14, 14)),
    ("inception_4c", (512, 14, 14)),
    ("inception_4d", (528, 14, 14)),
    ("inception_4e", (832, 14, 14)),
    ("maxpool4", (832, 7, 7)),
    ("inception_5a", (832, 7, 7)),
    ("inception_5b", (1024, 7, 7)),
    ("avgpool", (1024, 1, 1)),
    ("dropout", (1024, 1, 1)),
    ("linear", (1000, 1, 1)),
    ("softmax", (1000, 1, 1)),
)

# rows whose printed cells are known not to follow from the row's own
# configuration under any counting convention tried (see README)
EXPECTED_DISCREPANT = frozenset({"conv1"})

ROW_LABELS = {block: label for block, label, _, _ in TABLE1}
