"""Runs the CLI on small generated data and checks every JSON output against schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    cli, schema_dir = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    checked = 0
    with tempfile.TemporaryDirectory() as tmp:
        d = pathlib.Path(tmp)

        def run(*args: str, ok=(0,)) -> subprocess.CompletedProcess:
            r = subprocess.run([str(cli), *args], capture_output=True, text=True)
            if r.returncode not in ok:
                raise SystemExit(f"{' '.join(args)} exited {r.returncode}: {r.stderr}")
            return r

        def check(kind: str, doc: dict) -> None:
            nonlocal checked
            jsonschema.validate(doc, schemas[kind], cls=jsonschema.Draft202012Validator)
            checked += 1

        cases = [
            ("census", "income", "binary", ["--rows", "300"]),
            ("glass", "target", "multiclass", []),
            ("wine", "quality", "regression", []),
        ]
        for kind, target, task, extra in cases:
            data = d / f"{kind}.csv"
            model = d / f"{kind}.model.json"
            run("generate", "--kind", kind, "--out", str(data), *extra)
            run("train", "--data", str(data), "--target", target, "--task", task, "--estimators", "9",
                "--max-depth", "5", "--out", str(model))
            check("model", json.loads(model.read_text()))
            for row in range(4):
                base = ["--model", str(model), "--data", str(data), "--target", target, "--row", str(row)]
                rule = d / f"{kind}.{row}.rule.json"
                r = run("explain", *base, "--format", "json", "--out", str(rule), ok=(0, 1))
                if r.returncode != 0:
                    continue  # tied vote
                doc = json.loads(rule.read_text())
                check("rule", doc)
                check("plotdata", json.loads(run("explain", *base, "--format", "plotdata").stdout))
                check("audit", json.loads(run("audit", "--model", str(model), "--rule", str(rule), *base[2:]).stdout))
                doc["conditions"] = []
                loose = d / "loose.json"
                loose.write_text(json.dumps(doc))
                r = run("audit", "--model", str(model), "--rule", str(loose), *base[2:], ok=(0, 2))
                check("audit", json.loads(r.stdout))

    print(f"{checked} documents valid")
    return 0


if __name__ == "__main__":
    sys.exit(main())
