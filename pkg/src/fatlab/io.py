"""File formats for datasets, checkpoints, logs, reports and tables.

Binary formats are fully deterministic: a magic tag, a canonical-JSON
header (sorted keys, embedded resolved config), then raw little-endian
arrays. Delimited files carry the config in a leading ``# config=``
comment and print floats with ``repr`` so identical numbers give identical
bytes. A CSV dataset variant is accepted for hand-authored fixtures.
"""

import json
import os
import struct

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .model import ClassifierHead, EmbeddingModel

DATASET_MAGIC = b"FATLABDS"
CHECKPOINT_MAGIC = b"FATLABCK"
FORMAT_VERSION = 1


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write_header(fh, magic, header):
    blob = canonical_json(header).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)


def _read_header(fh, magic, kind):
    tag = fh.read(len(magic))
    if tag != magic:
        raise ConfigError(f"not a fatlab {kind} file (bad magic {tag!r})")
    (length,) = struct.unpack("<I", fh.read(4))
    return json.loads(fh.read(length).decode("utf-8"))


def _read_array(fh, dtype, shape):
    count = int(np.prod(shape)) if shape else 1
    raw = fh.read(count * np.dtype(dtype).itemsize)
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


# ---------------------------------------------------------------- datasets

def write_dataset(path, dataset, config=None):
    if str(path).endswith(".csv"):
        return _write_dataset_csv(path, dataset, config)
    header = {
        "version": FORMAT_VERSION,
        "n": len(dataset),
        "input_dim": dataset.input_dim,
        "num_classes": dataset.num_classes,
        "has_clean": dataset.clean_labels is not None,
        "config": config,
    }
    with open(path, "wb") as fh:
        _write_header(fh, DATASET_MAGIC, header)
        fh.write(dataset.ids.astype("<i8").tobytes())
        fh.write(dataset.labels.astype("<i8").tobytes())
        if dataset.clean_labels is not None:
            fh.write(dataset.clean_labels.astype("<i8").tobytes())
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f8").tobytes())


def read_dataset(path):
    """Returns (Dataset, embedded config or None)."""
    if str(path).endswith(".csv"):
        return _read_dataset_csv(path)
    with open(path, "rb") as fh:
        header = _read_header(fh, DATASET_MAGIC, "dataset")
        n, d = header["n"], header["input_dim"]
        ids = _read_array(fh, "<i8", (n,))
        labels = _read_array(fh, "<i8", (n,))
        clean = _read_array(fh, "<i8", (n,)) if header["has_clean"] else None
        feats = _read_array(fh, "<f8", (n, d))
    ds = Dataset(features=feats, labels=labels,
                 num_classes=header["num_classes"], ids=ids,
                 clean_labels=clean)
    return ds, header.get("config")


def _write_dataset_csv(path, dataset, config):
    has_clean = dataset.clean_labels is not None
    cols = ["id", "label"] + (["clean_label"] if has_clean else []) + \
        [f"x{i}" for i in range(dataset.input_dim)]
    with open(path, "w") as fh:
        if config is not None:
            fh.write(f"# config={canonical_json(config)}\n")
        fh.write(f"# num_classes={dataset.num_classes}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(len(dataset)):
            row = [str(int(dataset.ids[i])), str(int(dataset.labels[i]))]
            if has_clean:
                row.append(str(int(dataset.clean_labels[i])))
            row.extend(repr(float(v)) for v in dataset.features[i])
            fh.write(",".join(row) + "\n")


def _read_dataset_csv(path):
    config = None
    num_classes = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# config="):
                config = json.loads(line[len("# config="):])
            elif line.startswith("# num_classes="):
                num_classes = int(line.split("=", 1)[1])
            elif not line.startswith("#"):
                rows.append(line.split(","))
    header, data = rows[0], rows[1:]
    has_clean = "clean_label" in header
    base = 3 if has_clean else 2
    ids = np.array([int(r[0]) for r in data], dtype=np.int64)
    labels = np.array([int(r[1]) for r in data], dtype=np.int64)
    clean = np.array([int(r[2]) for r in data], dtype=np.int64) \
        if has_clean else None
    feats = np.array([[float(v) for v in r[base:]] for r in data])
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    ds = Dataset(features=feats, labels=labels, num_classes=num_classes,
                 ids=ids, clean_labels=clean)
    return ds, config


# -------------------------------------------------------------- checkpoints

def write_checkpoint(path, model, head=None, config=None):
    params = [(name, list(model.params[name].shape))
              for name in sorted(model.params)]
    header = {
        "version": FORMAT_VERSION,
        "architecture": model.architecture,
        "input_dim": model.input_dim,
        "embedding_dim": model.embedding_dim,
        "hidden_dim": model.hidden_dim,
        "nonlinearity": model.nonlinearity,
        "params": params,
        "head_classes": None if head is None else head.num_classes,
        "config": config,
    }
    with open(path, "wb") as fh:
        _write_header(fh, CHECKPOINT_MAGIC, header)
        for name, _ in params:
            fh.write(np.ascontiguousarray(model.params[name],
                                          dtype="<f8").tobytes())
        if head is not None:
            fh.write(np.ascontiguousarray(head.weight, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(head.bias, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Returns (EmbeddingModel, ClassifierHead or None, config or None)."""
    with open(path, "rb") as fh:
        header = _read_header(fh, CHECKPOINT_MAGIC, "checkpoint")
        params = {}
        for name, shape in header["params"]:
            params[name] = _read_array(fh, "<f8", tuple(shape))
        head = None
        if header["head_classes"]:
            c = header["head_classes"]
            d = header["embedding_dim"]
            head = ClassifierHead(_read_array(fh, "<f8", (d, c)),
                                  _read_array(fh, "<f8", (c,)))
    model = EmbeddingModel(header["architecture"], params,
                           header["input_dim"], header["embedding_dim"],
                           header["hidden_dim"], header["nonlinearity"])
    return model, head, header.get("config")


# ------------------------------------------------------------ noise masks

def write_noise_mask(path, dataset, mask, config=None):
    from .distill import NOISE_NAMES
    with open(path, "w") as fh:
        if config is not None:
            fh.write(f"# config={canonical_json(config)}\n")
        fh.write("id,noise,label,clean_label\n")
        clean = dataset.clean_labels if dataset.clean_labels is not None \
            else dataset.labels
        for i in range(len(dataset)):
            fh.write(f"{int(dataset.ids[i])},{NOISE_NAMES[int(mask[i])]},"
                     f"{int(dataset.labels[i])},{int(clean[i])}\n")


def read_noise_mask(path):
    from .distill import NOISE_CODES
    codes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("id,"):
                continue
            codes.append(NOISE_CODES[line.split(",")[1]])
    return np.array(codes, dtype=np.int64)


# -------------------------------------------------------------- train logs

TRAINLOG_COLUMNS = ("epoch", "loss", "hinge", "ce", "radii",
                    "active_fraction", "dropped_classes", "refresh_seconds",
                    "step_seconds")


def write_trainlog(path, log, config=None):
    with open(path, "w") as fh:
        if config is not None:
            fh.write(f"# config={canonical_json(config)}\n")
        fh.write(",".join(TRAINLOG_COLUMNS) + "\n")
        for r in log.records:
            fh.write(",".join([
                str(r.epoch), repr(r.loss), repr(r.hinge), repr(r.ce),
                repr(r.radii), repr(r.active_fraction),
                str(r.dropped_classes), repr(r.refresh_seconds),
                repr(r.step_seconds)]) + "\n")


def read_trainlog(path):
    """Returns a list of column dicts (floats/ints), skipping comments."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("epoch,"):
                continue
            vals = line.split(",")
            rec = dict(zip(TRAINLOG_COLUMNS, vals))
            out.append(rec)
    return out


# ------------------------------------------------------------- soft labels

def write_soft_labels(path, table, config=None):
    c = table.probs.shape[1]
    with open(path, "w") as fh:
        if config is not None:
            fh.write(f"# config={canonical_json(config)}\n")
        fh.write("id,trusted,confidence," +
                 ",".join(f"p{i}" for i in range(c)) + "\n")
        for i in range(len(table)):
            fh.write(f"{int(table.ids[i])},{int(table.trusted[i])},"
                     f"{repr(float(table.confidence[i]))},")
            fh.write(",".join(repr(float(v)) for v in table.probs[i]) + "\n")


def read_soft_labels(path):
    from .distill import SoftLabelTable
    ids, trusted, conf, probs = [], [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("id,"):
                continue
            parts = line.split(",")
            ids.append(int(parts[0]))
            trusted.append(bool(int(parts[1])))
            conf.append(float(parts[2]))
            probs.append([float(v) for v in parts[3:]])
    return SoftLabelTable(ids=np.array(ids, dtype=np.int64),
                          probs=np.array(probs),
                          confidence=np.array(conf),
                          trusted=np.array(trusted, dtype=bool))


# ------------------------------------------------------------------- bench

def write_bench(out_dir, reports, config=None):
    write_json(os.path.join(out_dir, "bench.json"),
               {"config": config, "results": [r.to_dict() for r in reports]})
    with open(os.path.join(out_dir, "bench.csv"), "w") as fh:
        fh.write("loss,backend,n,mean_ns,std_ns\n")
        for r in reports:
            for n, mean, std in zip(r.sizes, r.mean_seconds, r.std_seconds):
                fh.write(f"{r.loss},{r.backend},{n},"
                         f"{repr(mean * 1e9)},{repr(std * 1e9)}\n")
