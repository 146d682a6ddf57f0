"""
Comando synth: gera um cenário sintético nos formatos padrão de ingestão.

Arquivos em --out-dir (consumíveis diretamente por bias-dia / bias-dip):
    test_embeddings.febe | .csv, probe_embeddings.febe | .csv
    predictions.csv, expressions.txt, <atributo>.txt
    scenario.json (spec + cossenos entre âncoras), manifest.json
"""

import argparse
from pathlib import Path

from app.cli import common
from app.models.schemas import AttributeSchema, FileFormat, NullSpec, ScenarioSpec
from app.repositories.embeddings_repository import DatasetRepository
from app.repositories.findings_repository import FindingsRepository
from app.services import synthgen_service
from app.utils.logger import get_logger

logger = get_logger(__name__)

EMBEDDING_SUFFIX = {FileFormat.BINARY: ".febe", FileFormat.CSV: ".csv"}


# Campos de ScenarioSpec com flag própria; None mantém o valor do cenário de demonstração
_SPEC_FLAGS = (
    "target_expression", "tilted_group", "tilt", "dim", "expression_size", "group_size",
    "noise_scale", "base_accuracy", "accuracy_gap",
)


def register(subparsers: argparse._SubParsersAction) -> None:
    synth = subparsers.add_parser("synth", help="Gera cenário sintético (com viés plantado ou nulo)")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--scenario", choices=["biased", "null"], default="biased")
    synth.add_argument("--expressions", help="Vocabulário (default: as 7 expressões básicas)")
    synth.add_argument("--attribute", help="Esquema do atributo (default: gender com F/M)")
    synth.add_argument("--target-expression", help="default: anger")
    synth.add_argument("--tilted-group", help="Grupo inclinado (default: último do esquema)")
    synth.add_argument("--tilt", type=float, help="default: 1.0")
    synth.add_argument("--dim", type=int, help="default: 32")
    synth.add_argument("--expression-size", type=int, help="default: 200")
    synth.add_argument("--group-size", type=int, help="default: 500")
    synth.add_argument("--noise-scale", type=float, help="default: 1.0")
    synth.add_argument("--base-accuracy", type=float, help="default: 0.7")
    synth.add_argument("--accuracy-gap", type=float, help="default: 0.2")
    synth.add_argument("--embedding-format", choices=[f.value for f in FileFormat], default=FileFormat.BINARY.value)
    common.add_output_args(synth, formats=False)
    synth.set_defaults(func=cmd_synth)


def scenario_fields(args: argparse.Namespace, expressions: tuple[str, ...], schema: AttributeSchema) -> dict:
    """Campos do cenário de demonstração com as flags informadas por cima."""
    base = synthgen_service.demo_spec(args.seed, schema).model_dump()
    overrides = {f: getattr(args, f) for f in _SPEC_FLAGS if getattr(args, f) is not None}
    return {**base, "expressions": expressions, **overrides}


def cmd_synth(args: argparse.Namespace) -> int:
    repo, out = DatasetRepository(), FindingsRepository()
    out_dir = Path(args.out_dir)

    expressions = repo.load_vocabulary(args.expressions) if args.expressions else synthgen_service.DEMO_EXPRESSIONS
    schema = repo.load_schema(args.attribute) if args.attribute else synthgen_service.DEMO_SCHEMA
    fields = scenario_fields(args, expressions, schema)

    if args.scenario == "biased":
        spec = ScenarioSpec.model_validate(fields)
        test, probe, preds = synthgen_service.gen_biased(spec)
        scenario = {"scenario": "biased", "spec": spec.model_dump(mode="json"),
                    **synthgen_service.anchor_metadata(spec)}
    else:
        spec = NullSpec(
            dim=fields["dim"],
            expressions=fields["expressions"],
            groups=schema,
            expression_size=fields["expression_size"],
            group_size=fields["group_size"],
            noise_scale=fields["noise_scale"],
            accuracy=fields["base_accuracy"],
            seed=args.seed,
        )
        test, probe, preds = synthgen_service.gen_null(spec)
        scenario = {"scenario": "null", "spec": spec.model_dump(mode="json")}

    fmt = FileFormat(args.embedding_format)
    suffix = EMBEDDING_SUFFIX[fmt]
    repo.write_embeddings(test, out_dir / f"test_embeddings{suffix}", fmt)
    repo.write_embeddings(probe, out_dir / f"probe_embeddings{suffix}", fmt)
    repo.write_predictions(preds, out_dir / "predictions.csv")
    repo.write_names(expressions, out_dir / "expressions.txt")
    repo.write_names(schema.groups, out_dir / f"{schema.name}.txt")

    manifest = common.build_manifest(command="synth", config=scenario, inputs={}, schemas=[schema],
                                     vocabularies={"expressions": expressions})
    out.write_manifest(manifest, out_dir / "manifest.json")
    out.write_json({"manifest_digest": manifest.digest, **scenario}, out_dir / "scenario.json")
    logger.info(f"synth concluído | cenário={args.scenario} | seed={args.seed} | out={out_dir}")
    return 0
