"""Prediction with saved checkpoint bundles, honouring per-domain routing."""

import logging
from typing import Dict, List, Mapping, Tuple, TypeVar

from .corpus import Dataset, Instance
from .evaluation import PredictionSet
from .persistence import DTYPES, Bundle, LoadedCheckpoint
from .training import RunContext, predict_split
from .utils.errors import NotFoundError, ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def route_by_domain(routing: Mapping[str, T], instance: Instance) -> T:
    """
    Variant responsible for an instance's domain.

    Raises:
        NotFoundError: If the routing has no entry for the domain
    """
    try:
        return routing[instance.domain.value]
    except KeyError:
        raise NotFoundError("Routing entry for domain", instance.domain.value)


def group_by_route(routing: Mapping[str, T], dataset: Dataset) -> List[Tuple[T, Dataset]]:
    """Partition a dataset by routed variant; variants shared by domains form one group."""
    groups: Dict[int, Tuple[T, List[Instance]]] = {}
    for instance in dataset:
        variant = route_by_domain(routing, instance)
        groups.setdefault(id(variant), (variant, []))[1].append(instance)
    return [(variant, dataset.with_instances(items)) for variant, items in groups.values()]


def checkpoint_context(bundle: Bundle, checkpoint: LoadedCheckpoint) -> RunContext:
    return RunContext(
        vocab=bundle.vocab,
        max_len=bundle.max_len,
        table=bundle.table,
        normalizer=checkpoint.meta.normalizer,
        dtype=DTYPES[checkpoint.meta.dtype],
    )


def predict_with_bundle(bundle: Bundle, dataset: Dataset) -> PredictionSet:
    """
    One clamped prediction per instance, in dataset order.

    Raises:
        ValidationError: If the dataset's subtask differs from the bundle's
    """
    if dataset.subtask is not bundle.subtask:
        raise ValidationError(
            "subtask",
            f"bundle was trained for {bundle.subtask.value}, dataset is {dataset.subtask.value}",
            dataset.subtask.value,
        )
    if bundle.routed:
        groups = group_by_route(bundle.models, dataset)
    else:
        groups = [(bundle.models["all"], dataset)]

    scores: Dict[str, float] = {}
    for checkpoint, part in groups:
        predictions = predict_split(checkpoint.model, part, checkpoint_context(bundle, checkpoint))
        scores.update(predictions.scores)
    logger.info(f"Predicted {len(scores)} instances with bundle {bundle.path}")
    return PredictionSet(scores={i: scores[i] for i in dataset.ids})
