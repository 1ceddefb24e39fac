"""Python access to the guided BI recommendation engine."""

import json

from . import _core
from ._core import Error, NotFoundError, Ontology, UnavailableError, ValidationError, Workload, derive_seed

__all__ = [
    "Error",
    "NotFoundError",
    "Ontology",
    "Service",
    "UnavailableError",
    "ValidationError",
    "Workload",
    "default_pipeline_config",
    "derive_seed",
    "evaluate",
    "generate_workload",
    "mrr",
    "pattern_jaccard",
    "precision_at_3",
    "train_bundle",
    "workload_preset",
]


def workload_preset(name, ahi=False):
    return json.loads(_core.workload_preset(name, ahi))


def generate_workload(ontology, config, seed):
    if isinstance(config, str):
        config = workload_preset(config)
    return Workload.generate(ontology, json.dumps(config), seed)


def default_pipeline_config():
    return json.loads(_core.default_pipeline_config())


def evaluate(ontology, workload, config=None):
    """Cross-validated evaluation; returns the report as a dict."""
    return json.loads(_core.evaluate(ontology, workload, json.dumps(config or {})))


def train_bundle(ontology, workload, out_dir, config=None):
    """Writes ontology.json, embedder.json, intent.json and index.json into out_dir."""
    _core.train_bundle(ontology, workload, json.dumps(config or {}), str(out_dir))


def pattern_jaccard(expected, predicted):
    return _core.pattern_jaccard(json.dumps(expected), json.dumps(predicted))


def precision_at_3(log):
    return _core.precision_at_3(json.dumps(log))


def mrr(log):
    return _core.mrr(json.dumps(log))


class Service:
    """In-process recommendation service with dict in, dict out."""

    def __init__(self, k=3, w_s=0.5, n_inferred=3):
        self._svc = _core.Service(k, w_s, n_inferred)

    def load(self, ontology, embedder, intent, index):
        self._svc.load(str(ontology), str(embedder), str(intent), str(index))

    @property
    def ready(self):
        return self._svc.ready

    def create_session(self):
        return self._svc.create_session()

    def submit_query(self, session_id, pattern):
        return json.loads(self._svc.submit_query(session_id, json.dumps(pattern)))

    def submit_feedback(self, session_id, ranks):
        self._svc.submit_feedback(session_id, list(ranks))

    def get_session(self, session_id):
        return json.loads(self._svc.get_session(session_id))

    def ontology_summary(self):
        return json.loads(self._svc.ontology_summary())

    def export_feedback(self):
        return json.loads(self._svc.export_feedback())
