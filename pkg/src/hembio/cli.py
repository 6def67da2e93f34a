"""Command line: ``hembio keygen | enroll | auth | gen-vectors | bench | serve``.

Exit codes for ``auth``: 0 ACCEPT, 1 REJECT, 2 TERMINATED, 3 local failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import Config, hembio_home, load_config
from .gates import PARAMETER_SETS, GateError, keygen
from .matcher import BiometricVector, generate_pair
from .oracle import native_euclid2
from .protocol import (
    Client,
    ClientIdentity,
    ErrorMessage,
    IdToken,
    RegisterOk,
    Server,
    TerminateMessage,
    Termination,
    Verdict,
    run_protocol,
)
from .store import KeyStore, RecordStore, check_client_id
from .transport import TcpChannel, parse_address, serve
from .wire import FrameError

EXIT_ACCEPT, EXIT_REJECT, EXIT_TERMINATED, EXIT_FAILURE = 0, 1, 2, 3


class CliError(Exception):
    pass


def _keys_dir(args) -> Path:
    if args.keys:
        return Path(args.keys)
    return hembio_home() / "keys" / args.id


def _load_identity(args, cfg: Config) -> tuple[ClientIdentity, Config]:
    store = KeyStore(_keys_dir(args))
    if not store.exists():
        raise CliError(f"no keys in {store.root}; run keygen first")
    keys = store.load()
    return ClientIdentity(args.id, keys), cfg.with_(backend=keys.cloud_key.backend, params=keys.params)


def _vector(path, cfg: Config) -> tuple[BiometricVector, Config]:
    vec = BiometricVector.load(path)
    return vec, cfg.with_(n=vec.n, w=vec.width)


def cmd_keygen(args, cfg: Config) -> int:
    if args.out:
        out = Path(args.out)
    elif args.id:
        out = hembio_home() / "keys" / check_client_id(args.id)
    else:
        raise CliError("keygen needs --out or --id")
    backend = args.backend or cfg.backend
    params = args.params or cfg.params
    keys = keygen(params, backend)
    KeyStore(out).save(keys)
    print(f"wrote {backend} keys ({params}) to {out}")
    return 0


def cmd_enroll(args, cfg: Config) -> int:
    identity, cfg = _load_identity(args, cfg)
    identity.template, cfg = _vector(args.template, cfg)
    client = Client(identity, cfg)
    with TcpChannel(parse_address(args.server), timeout=args.timeout) as ch:
        reply = ch.request(client.register())
    if isinstance(reply, RegisterOk):
        print(f"ENROLLED {reply.client_id}")
        return 0
    if isinstance(reply, TerminateMessage):
        print(f"TERMINATED({reply.reason.label}) {reply.detail}".rstrip())
        return EXIT_TERMINATED
    detail = reply.detail if isinstance(reply, ErrorMessage) else type(reply).__name__
    raise CliError(f"server error: {detail}")


def cmd_auth(args, cfg: Config) -> int:
    identity, cfg = _load_identity(args, cfg)
    sample, cfg = _vector(args.sample, cfg)
    result = run_protocol(Client(identity, cfg), TcpChannel(parse_address(args.server), timeout=args.timeout), sample)
    if isinstance(result, IdToken):
        print(result.verdict.name)
        return EXIT_ACCEPT if result.verdict is Verdict.ACCEPT else EXIT_REJECT
    assert isinstance(result, Termination)
    print(str(result))
    if result.detail:
        print(result.detail, file=sys.stderr)
    return EXIT_TERMINATED


def cmd_gen_vectors(args, cfg: Config) -> int:
    template, sample = generate_pair(args.n, args.w, args.distance, args.count, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    template.save(out / "template.vec")
    sample.save(out / "sample.vec")
    d2 = native_euclid2(template.components, sample.components)
    print(f"wrote {out / 'template.vec'} and {out / 'sample.vec'}; squared distance {d2}")
    return 0


def cmd_bench(args, cfg: Config) -> int:
    from .bench import run_bench

    n = 128 if args.full else args.n
    report = run_bench(
        args.profile,
        args.backend,
        n=n,
        w=args.w,
        trials=args.trials,
        timeout=args.timeout,
        workers=args.workers,
        token_bits=cfg.token_bits,
        threshold=cfg.threshold,
        params=args.params or cfg.params,
    )
    print(report.render())
    for label, ok in report.orderings():
        print(f"{'ok  ' if ok else 'FAIL'} {label}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            report.to_csv(fh)
    return 0


def cmd_serve(args, cfg: Config) -> int:
    store_dir = Path(args.store) if args.store else hembio_home() / "records"
    server = Server(cfg, store=RecordStore(store_dir), workers=args.workers)
    logging.info("record store %s, backend %s, n=%d w=%d B=%d", store_dir, cfg.backend, cfg.n, cfg.w, cfg.threshold)
    try:
        serve(parse_address(args.bind), server)
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hembio", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hembio {__version__}")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keygen", help="generate a secret/cloud key pair")
    k.add_argument("--out", help="key directory (default $HEMBIO_HOME/keys/ID)")
    k.add_argument("--id")
    k.add_argument("--params", choices=sorted(PARAMETER_SETS))
    k.add_argument("--backend", choices=("clear", "fhe"))
    k.set_defaults(func=cmd_keygen)

    for name, field, helptext in (("enroll", "template", "register a template"), ("auth", "sample", "authenticate")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--server", required=True, metavar="HOST:PORT")
        c.add_argument("--id", required=True)
        c.add_argument(f"--{field}", required=True, metavar="FILE")
        c.add_argument("--keys", help="key directory (default $HEMBIO_HOME/keys/ID)")
        c.add_argument("--timeout", type=float, default=None, help="socket timeout in seconds")
        c.set_defaults(func=cmd_enroll if name == "enroll" else cmd_auth)

    g = sub.add_parser("gen-vectors", help="write a template/sample pair at a known distance")
    g.add_argument("--n", type=int, default=128)
    g.add_argument("--w", type=int, default=8)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--distance", type=int, required=True, help="per-component offset D")
    g.add_argument("--count", type=int, default=1, help="number of perturbed components")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen_vectors)

    b = sub.add_parser("bench", help="time circuits (table1) or the protocol (table2)")
    b.add_argument("--profile", choices=("table1", "table2"), default="table1")
    b.add_argument("--backend", choices=("clear", "mock", "fhe"), default="clear")
    b.add_argument("--n", type=int, default=8)
    b.add_argument("--w", type=int, default=8)
    b.add_argument("--full", action="store_true", help="use n=128")
    b.add_argument("--trials", type=int, default=None)
    b.add_argument("--timeout", type=float, default=None, help="per-row budget in seconds")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--params", choices=sorted(PARAMETER_SETS))
    b.add_argument("--out", help="CSV report path")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("serve", help="run the authentication server")
    s.add_argument("--bind", default="127.0.0.1:7878", metavar="HOST:PORT")
    s.add_argument("--store", help="record directory (default $HEMBIO_HOME/records)")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose or args.command == "serve" else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (CliError, OSError, ValueError, GateError, FrameError, EOFError) as exc:
        print(f"hembio: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
