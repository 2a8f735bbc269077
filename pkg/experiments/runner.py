import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from evaluation.exact import as_decimal, opt_dp
from evaluation.report import competitive_report, write_csv, write_jsonl
from model.serialization import load_tree, tree_to_document
from model.tree import perturb_leaves, validate_supermartingale

logger = logging.getLogger(__name__)

STATUS_EVALUATED = "evaluated"
STATUS_FAILED = "failed"


def load_source(source):
    if source.path is not None:
        return load_tree(source.path)
    return source.generator.build()


def evaluate_source(source, config, policies=None):
    """
    Evaluate one instance and check the configured assertions.

    Returns (records, failed_assertions). With a robustness factor the perturbed
    tree is evaluated against OPT of the original one.
    """
    policies = list(policies or config.policies)
    tree = load_source(source)
    instance_id = source.instance_id
    violations = validate_supermartingale(tree)
    if violations:
        logger.warning(f"{instance_id}: {len(violations)} validation problem(s); evaluating anyway")

    reference_opt = None
    alpha = Fraction(1)
    evaluated = tree
    if config.alpha is not None:
        alpha = Fraction(config.alpha)
        reference_opt = opt_dp(tree).value
        evaluated = perturb_leaves(
            tree, alpha, config.perturb_rule, seed=config.seed, scope=config.perturb_scope)

    reports = competitive_report(
        evaluated, policies,
        instance_id=instance_id,
        trials=config.trials,
        seed=config.seed,
        alpha=alpha,
        reference_opt=reference_opt,
    )
    records = [r.to_record() for r in reports]
    for record in records:
        record["status"] = STATUS_EVALUATED
        record["valid"] = not violations

    failed = []
    scale = as_decimal(alpha)
    for assertion in config.assertions:
        for record in records:
            if record["policy"] == assertion.policy and not assertion.holds(record, scale):
                failed.append(str(assertion))
                record.setdefault("failed_assertions", []).append(str(assertion))
                record["violating_instance"] = tree_to_document(tree)
                logger.warning(f"{instance_id}: assertion {assertion} failed (ratio {record['ratio']})")
    return records, failed


def _evaluate_item(args):
    """Worker entry point; never raises so one bad instance cannot sink the batch."""
    source, config, policies = args
    start = time.time()
    try:
        records, failed = evaluate_source(source, config, policies)
        return source, records, failed, None, time.time() - start
    except Exception as e:
        error_msg = f"{type(e).__name__}: {str(e)}"
        return source, [], [], error_msg, time.time() - start


def _open_tracking(config):
    from db.connection import TrackingSettings, get_tracking_db, tracking_enabled
    from db.tracking import get_tracking_collection, reset_stuck_processing

    if not tracking_enabled():
        logger.warning("STOPWISE_TRACKING_DB_URL is not set; tracking against localhost")

    settings = TrackingSettings.from_env()
    client, db = get_tracking_db(settings)
    collection = get_tracking_collection(db, settings.collection)
    reset_stuck_processing(collection)
    return client, collection


def run_batch(config):
    """
    Evaluate every configured instance, write JSON-lines and CSV reports and
    return a summary dict with counts and the assertion outcome.
    """
    config.validate()

    output_dir = os.path.abspath(config.output_dir)
    os.makedirs(output_dir, exist_ok=True)

    client = None
    collection = None
    if config.track:
        from db.schemas import item_key
        from db.tracking import (
            create_pending_record,
            get_completed_item_keys,
            mark_completed,
            mark_failed,
            mark_processing,
        )
        client, collection = _open_tracking(config)

    try:
        completed = set()
        if collection is not None and config.resume:
            completed = get_completed_item_keys(collection, config.label)

        work_list = []
        skipped = 0
        for source in config.sources:
            pending = [
                p for p in config.policies
                if collection is None or item_key(config.label, source.instance_id, p) not in completed
            ]
            skipped += len(config.policies) - len(pending)
            if pending:
                work_list.append((source, config, pending))

        logger.info(
            f"Found {len(work_list)} instance(s) to evaluate "
            f"({skipped} (instance, policy) item(s) skipped as already completed)"
        )

        keys = {}
        if collection is not None:
            for source, _, pending in work_list:
                for policy in pending:
                    key = create_pending_record(collection, config.label, source.instance_id, policy)
                    mark_processing(collection, key)
                    keys[(source.instance_id, policy)] = key

        if config.workers > 1 and len(work_list) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_evaluate_item, work_list))
        else:
            results = []
            for i, item in enumerate(work_list, 1):
                logger.info(f"[{i}/{len(work_list)}] Evaluating instance {item[0].instance_id}")
                results.append(_evaluate_item(item))

        records = []
        failed_assertions = []
        failed_items = 0
        for source, item_records, failed, error_msg, duration in results:
            if error_msg is not None:
                failed_items += 1
                logger.warning(f"Failed instance {source.instance_id}: {error_msg}")
                records.append({
                    "instance_id": source.instance_id,
                    "status": STATUS_FAILED,
                    "error": error_msg,
                })
                for (instance_id, _), key in keys.items():
                    if instance_id == source.instance_id:
                        mark_failed(collection, key, error_msg)
                continue
            records.extend(item_records)
            failed_assertions.extend(f"{source.instance_id}: {a}" for a in failed)
            for record in item_records:
                key = keys.get((source.instance_id, record["policy"]))
                if key is not None:
                    mark_completed(collection, key, record, round(duration, 2))

        evaluated = [r for r in records if r.get("status") == STATUS_EVALUATED]
        jsonl_path = os.path.join(output_dir, f"{config.label}.jsonl")
        csv_path = os.path.join(output_dir, f"{config.label}.csv")
        write_jsonl(records, jsonl_path, config=config.to_dict())
        write_csv(evaluated, csv_path)

        summary = {
            "instances": len(config.sources),
            "evaluated": len(work_list) - failed_items,
            "failed": failed_items,
            "skipped_items": skipped,
            "records": len(evaluated),
            "bound_violations": sum(1 for r in evaluated if r.get("bound_violated")),
            "assertions": [str(a) for a in config.assertions],
            "assertion_failures": len(failed_assertions),
            "max_ratio": _max_ratio(evaluated),
            "report": jsonl_path,
            "table": csv_path,
        }
        if failed_assertions:
            summary["first_failure"] = failed_assertions[0]
        logger.info(f"Batch complete: {summary['evaluated']} evaluated, {failed_items} failed")
        return summary

    finally:
        if client is not None:
            client.close()
            logger.debug("Tracking DB connection closed.")


def _max_ratio(records):
    ratios = {}
    for record in records:
        ratio = record["ratio"]
        value = float("inf") if ratio == "∞" else ratio
        ratios[record["policy"]] = max(ratios.get(record["policy"], float("-inf")), value)
    return {policy: (str(v) if v == float("inf") else round(float(v), 6)) for policy, v in ratios.items()}
