"""``gait`` command-line interface.

Exit codes: 0 success or match, 1 no-match or refused, 2 usage error,
3 data error (unreadable or invalid input, unknown subject).
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import warnings
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bbe, bench, protocol, sot
from .ablstm import AblstmNetwork, Dims, extract_template, init_network
from .pairing import DEFAULT_PRIME, TransparentGroup, group_from_description
from .signal import CHANNELS, NoDominantPeriodError, dominant_cycle, read_csv
from .template import DEFAULT_SCALE, FeatureTemplate, QuantizedTemplate, Role
from .vault import FileVault, NotFoundError, RecordKind, VaultRecord, match_in_vault, score_in_vault

EXIT_OK, EXIT_REFUSED, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
VAULT_ENV = "GAIT_VAULT_PATH"
DEFAULT_VAULT = "gait-vault.log"


class DataError(Exception):
    pass


# -- helpers -------------------------------------------------------------------


def _np_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def _py_rng(seed: int | None) -> random.Random:
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _load(path: str, loader: Callable[[dict], object]):
    data = _read_json(path)
    try:
        return loader(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text.rstrip("\n"))


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True)


def _write_json(path: Path, data: dict) -> None:
    path.write_text(_dump(data) + "\n")


def _vault(args) -> FileVault:
    return FileVault(args.vault or os.environ.get(VAULT_ENV) or DEFAULT_VAULT)


def _template(path: str, role: Role) -> FeatureTemplate:
    return _load(path, FeatureTemplate.from_dict).with_role(role)


# -- commands ------------------------------------------------------------------


def cmd_dca(args) -> int:
    signal = read_csv(args.input)
    channels = range(CHANNELS) if args.channel is None else [args.channel]
    rows = []
    for ch in channels:
        try:
            rows.append((ch, dominant_cycle(signal.channels[ch])))
        except NoDominantPeriodError:
            rows.append((ch, None))
    if all(cycle is None for _, cycle in rows):
        raise DataError("no channel has a dominant period")
    if args.format == "csv":
        _emit(args, "channel,cycle\n" + "\n".join(f"{c},{'' if t is None else t}" for c, t in rows))
    else:
        _emit(args, _dump({"length": signal.length, "cycles": {str(c): t for c, t in rows}}))
    return EXIT_OK


def cmd_model_init(args) -> int:
    dims = Dims(args.hidden, args.windows, args.cycle, args.classes)
    net = init_network(dims, _np_rng(args.seed), dropout=args.dropout)
    _emit(args, json.dumps(net.to_dict()))
    return EXIT_OK


def cmd_extract(args) -> int:
    net = _load(args.model, AblstmNetwork.from_dict)
    template = extract_template(net, read_csv(args.input), Role(args.role))
    _emit(args, _dump(template.to_dict()))
    return EXIT_OK


def cmd_sot_keygen(args) -> int:
    key = sot.keygen(args.n, args.m, _np_rng(args.seed), threshold=args.threshold)
    _emit(args, json.dumps(key.to_dict()))
    return EXIT_OK


def cmd_enroll(args) -> int:
    key = _load(args.key, sot.SotKey.from_dict)
    enc = sot.encrypt_reference(key, _template(args.template, Role.REFERENCE), rng=_np_rng(args.seed))
    payload = json.dumps(enc.to_dict(), sort_keys=True).encode()
    rid = _vault(args).put(VaultRecord(args.subject, RecordKind.ENC_REFERENCE, payload))
    _emit(args, _dump({"subject": args.subject, "record": rid}))
    return EXIT_OK


def cmd_identify(args) -> int:
    key = _load(args.key, sot.SotKey.from_dict)
    enc = sot.encrypt_identification(key, _template(args.template, Role.IDENTIFICATION), rng=_np_rng(args.seed))
    if args.decision_only:
        decision = match_in_vault(_vault(args), args.subject, enc)
        row = {"subject": args.subject, "decision": decision.value}
    else:
        score = score_in_vault(_vault(args), args.subject, enc)
        decision = sot.decide(score)
        row = {"subject": args.subject, "score": score, "decision": decision.value}
    if args.format == "csv":
        _emit(args, ",".join(row) + "\n" + ",".join(repr(v) if isinstance(v, float) else v for v in row.values()))
    else:
        _emit(args, _dump(row))
    return EXIT_OK if decision is sot.Decision.MATCH else EXIT_REFUSED


def cmd_bbe_setup(args) -> int:
    key = _load(args.sot_key, sot.SotKey.from_dict)
    group = TransparentGroup(args.prime)
    w_ext = bbe.reference_vector(_template(args.reference, Role.REFERENCE), key, group.p, scale=args.scale)
    pp, msk = bbe.setup(w_ext, group, _py_rng(args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "params.json", pp.to_dict())
    _write_json(out / "master.json", dict(msk.to_dict(), group=group.describe()))
    print(_dump({"params": str(out / "params.json"), "master": str(out / "master.json"), "N": pp.n}))
    return EXIT_OK


def cmd_bbe_keygen(args) -> int:
    key = _load(args.sot_key, sot.SotKey.from_dict)
    master = _read_json(args.master)
    try:
        group = group_from_description(master["group"])
        msk = bbe.BbeMasterKey.from_dict(master)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.master}: {exc}") from None
    pre = bbe.preprocess(
        _template(args.reference, Role.REFERENCE),
        _template(args.probe, Role.IDENTIFICATION),
        key,
        group.p,
        scale=args.scale,
        rng=_np_rng(args.seed),
    )
    if not pre.accepted:
        print("probe rejected: templates are not similar enough for key issuance", file=sys.stderr)
        return EXIT_REFUSED
    sk = bbe.keygen(msk, pre.z_ext, group, _py_rng(args.seed))
    _emit(args, _dump({"version": 1, "kind": "bbe-receiver-key", "key": sk.to_dict(group), "z": pre.z_ext.to_dict()}))
    return EXIT_OK


def cmd_bbe_encrypt(args) -> int:
    pp = _load(args.params, bbe.BbePublicParams.from_dict)
    try:
        message = Path(args.msg).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {args.msg}: {exc.strerror}") from None
    ct = bbe.seal_bytes(pp, message, _py_rng(args.seed))
    _emit(args, json.dumps(ct.to_dict(pp.group)))
    return EXIT_OK


def cmd_bbe_decrypt(args) -> int:
    receiver = _read_json(args.key)
    try:
        if receiver.get("kind") != "bbe-receiver-key":
            raise ValueError("expected a bbe-receiver-key file")
        group = group_from_description(receiver["key"]["group"])
        sk = bbe.BbePrivateKey.from_dict(receiver["key"])
        z = QuantizedTemplate.from_dict(receiver["z"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.key}: {exc}") from None
    ct = _load(args.ct, bbe.HybridCiphertext.from_dict)
    try:
        plaintext = bbe.open_bytes(sk, ct, z, group)
    except bbe.TagMismatchError:
        print("decryption refused: integrity tag mismatch", file=sys.stderr)
        return EXIT_REFUSED
    if args.out:
        Path(args.out).write_bytes(plaintext)
    else:
        sys.stdout.buffer.write(plaintext)
        sys.stdout.flush()
    return EXIT_OK


def cmd_demo(args) -> int:
    run = protocol.demo_scenario(
        args.scenario,
        args.seed if args.seed is not None else 0,
        n=args.n,
        m=args.m,
        impostor=args.impostor,
        payload=args.payload.encode(),
    )
    if args.format == "json":
        _emit(args, _dump({"transcripts": [t.to_dict() for t in run.transcripts]}))
    else:
        _emit(args, "\n\n".join(t.format_table() for t in run.transcripts))
    ok = {protocol.Outcome.ENROLLED, protocol.Outcome.IDENTIFIED, protocol.Outcome.MESSAGE_DELIVERED}
    return EXIT_OK if run.outcome in ok else EXIT_REFUSED


def cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.success_rate:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", bench.DegenerateNoiseWarning)
            rows = [
                (n, m, bench.synthetic_match_experiment(n, m, args.subjects, args.noise, seed))
                for n in args.n
                for m in args.m
            ]
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if args.format == "json":
            _emit(args, _dump({"rows": [{"n": n, "m": m, "success_pct": r} for n, m, r in rows]}))
        else:
            _emit(args, "n,m,success_pct\n" + "\n".join(f"{n},{m},{r:.3f}" for n, m, r in rows))
        return EXIT_OK
    report = bench.bench_sot(args.n, args.m, args.batch, args.reps, seed)
    _emit(args, _dump(report.to_dict()) if args.format == "json" else report.to_csv())
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for all randomness (default: OS entropy)")
    common.add_argument("--out", help="write output here instead of stdout")

    def fmt(default: str = "json") -> argparse.ArgumentParser:
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--format", choices=("json", "csv"), default=default)
        return p

    vault = argparse.ArgumentParser(add_help=False)
    vault.add_argument("--vault", help=f"vault log file (default: ${VAULT_ENV} or ./{DEFAULT_VAULT})")

    bbe_opts = argparse.ArgumentParser(add_help=False)
    bbe_opts.add_argument("--scale", type=int, default=DEFAULT_SCALE, help="quantization scale (power of two)")

    parser = argparse.ArgumentParser(prog="gait", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help: str, parents=()) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, parents=[common, *parents])
        p.set_defaults(func=func)
        return p

    p = add("dca", cmd_dca, "dominant gait cycle of a CSV signal", [fmt()])
    p.add_argument("--input", required=True)
    p.add_argument("--channel", type=int, choices=range(CHANNELS), help="only this channel")

    p = add("model-init", cmd_model_init, "write a randomly initialized feature extractor")
    p.add_argument("--hidden", type=int, default=4, help="hidden size per LSTM")
    p.add_argument("--windows", type=int, default=5, help="windows per sample (n)")
    p.add_argument("--cycle", type=int, default=100, help="window length (T)")
    p.add_argument("--classes", type=int, default=10, help="output classes")
    p.add_argument("--dropout", type=float, default=0.0)

    p = add("extract", cmd_extract, "extract a feature template from a CSV signal")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--role", choices=[r.value for r in Role], default=Role.REFERENCE.value)

    p = add("sot-keygen", cmd_sot_keygen, "generate a SOT key")
    p.add_argument("-n", type=int, default=600, help="template length")
    p.add_argument("-m", type=int, default=3, help="number of inserted parameters")
    p.add_argument("--threshold", type=float, help="accept iff squared distance <= threshold")

    p = add("enroll", cmd_enroll, "encrypt a reference template and store it", [vault])
    p.add_argument("--key", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--subject", required=True)

    p = add("identify", cmd_identify, "match a probe template against an enrolled subject", [vault, fmt()])
    p.add_argument("--key", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--decision-only", action="store_true", help="report only match/no_match, not the raw score")

    p = add("bbe-setup", cmd_bbe_setup, "public parameters and master key for a reference template", [bbe_opts])
    p.add_argument("--reference", required=True)
    p.add_argument("--sot-key", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prime", type=int, default=DEFAULT_PRIME)

    p = add("bbe-keygen", cmd_bbe_keygen, "private key for a probe similar to the reference", [bbe_opts])
    p.add_argument("--master", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--sot-key", required=True)

    p = add("bbe-encrypt", cmd_bbe_encrypt, "seal a file under public parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--msg", required=True)

    p = add("bbe-decrypt", cmd_bbe_decrypt, "open a sealed file with a receiver key")
    p.add_argument("--key", required=True)
    p.add_argument("--ct", required=True)

    p = add("demo", cmd_demo, "run a simulated device/cloud flow")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--scenario", choices=("register", "identify", "exchange"), required=True)
    p.add_argument("--impostor", action="store_true", help="probe with an unrelated template")
    p.add_argument("-n", type=int, default=600)
    p.add_argument("-m", type=int, default=3)
    p.add_argument("--payload", default="hello")

    p = add("bench", cmd_bench, "SOT encryption timings or synthetic success rates", [fmt("csv")])
    p.add_argument("--n", type=int, nargs="+", default=list(bench.DEFAULT_NS))
    p.add_argument("--m", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--success-rate", action="store_true", help="run the synthetic matching experiment")
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except NotFoundError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ValueError, OSError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
