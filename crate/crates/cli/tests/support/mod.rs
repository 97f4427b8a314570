#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const EPOCH: &str = "1700000000";

/// Twenty files in Python, JavaScript and Go plus build files, one file over
/// the size cap and one binary blob.
pub fn fixture_repo(root: &Path) {
    let files: &[(&str, &str)] = &[
        ("README.md", "# Shop\n\nA small shop with an API, a web client and a worker.\n"),
        ("Dockerfile", "FROM python:3.12-slim\n# app image\nCOPY api /app/api\nCMD [\"python\", \"-m\", \"api.app\"]\n"),
        (
            "docker-compose.yml",
            "services:\n  api:\n    build: . # local image\n    ports: [\"8000:8000\"]\n  worker:\n    build: ./worker\n  db:\n    image: postgres:16\n",
        ),
        ("requirements.txt", "flask==3.0.0\npsycopg[binary]==3.1.18\n"),
        ("package.json", "{\n  \"name\": \"shop-web\",\n  \"version\": \"1.0.0\"\n}\n"),
        ("go.mod", "module example.com/shop/worker\n\ngo 1.22\n"),
        ("api/__init__.py", ""),
        (
            "api/app.py",
            "from flask import Flask  # web framework\nfrom api.routes import register\n\napp = Flask(__name__)\nregister(app)\n\nif __name__ == \"__main__\":\n    app.run(port=8000)  # dev server\n",
        ),
        ("api/models.py", "class Order:\n    \"\"\"An order # with a hash in a docstring.\"\"\"\n    def __init__(self, id, total):\n        self.id = id\n        self.total = total\n"),
        ("api/routes.py", "from api.db import orders\n\n# HTTP routes\ndef register(app):\n    @app.get(\"/orders\")\n    def list_orders():\n        return [o.__dict__ for o in orders()]\n"),
        ("api/db.py", "import psycopg\nfrom api.models import Order\n\ndef orders():\n    # naive query\n    return [Order(1, 9.5)]\n"),
        ("web/src/index.js", "import { fetchOrders } from './client.js'; // api client\nimport { render } from './view.js';\n\nfetchOrders().then(render);\n"),
        ("web/src/client.js", "/* Thin wrapper around fetch. */\nexport async function fetchOrders() {\n  const r = await fetch('http://localhost:8000/orders');\n  return r.json();\n}\n"),
        ("web/src/view.js", "export function render(orders) {\n  // one line per order\n  document.body.textContent = orders.map(o => `#${o.id}: ${o.total}`).join('\\n');\n}\n"),
        ("worker/main.go", "package main\n\n// Entry point.\nfunc main() {\n\tq := NewQueue()\n\tfor j := range q.Jobs() {\n\t\tRun(j)\n\t}\n}\n"),
        ("worker/queue.go", "package main\n\ntype Queue struct{ ch chan Job }\n\n/* NewQueue builds an in-memory queue. */\nfunc NewQueue() *Queue { return &Queue{ch: make(chan Job)} }\n\nfunc (q *Queue) Jobs() <-chan Job { return q.ch }\n"),
        ("worker/jobs.go", "package main\n\ntype Job struct{ ID int }\n\nfunc Run(j Job) {} // no-op\n"),
        ("scripts/seed.py", "#!/usr/bin/env python3\nfrom api.db import orders\nprint(len(orders()))  # count\n"),
    ];
    for (path, body) in files {
        write(root, path, body.as_bytes());
    }
    let mut large = String::new();
    while large.len() <= 600 * 1024 {
        large.push_str("ROWS.append({'id': 1, 'name': 'placeholder row for a large generated file'})\n");
    }
    write(root, "data/large_dump.py", large.as_bytes());
    write(
        root,
        "assets/blob.dat",
        &[0x89, b'P', b'N', b'G', 0, 0, 0, 13, 0xff, 0xfe, 0, 1],
    );
}

pub fn write(root: &Path, rel: &str, bytes: &[u8]) {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}

pub fn ciao() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ciao"));
    c.env_remove("CIAO_API_KEY")
        .env_remove("CIAO_BASE_URL")
        .env("CIAO_LOG", "error");
    c
}

/// Mock-mode generate with a frozen clock.
pub fn generate_mock(repo: &Path, out: &Path, mock: &Path, extra: &[&str]) -> Output {
    ciao()
        .arg("generate")
        .arg(repo)
        .arg("--out")
        .arg(out)
        .arg("--mock-script")
        .arg(mock)
        .args(["--clock-epoch", EPOCH])
        .args(extra)
        .output()
        .unwrap()
}

pub fn empty_script(dir: &Path) -> PathBuf {
    let p = dir.join("mock.json");
    std::fs::write(&p, "[]").unwrap();
    p
}

/// Renderer stand-in: `<cmd> -tpng file.puml` writes `file.png`.
pub fn fake_renderer(dir: &Path) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let p = dir.join("fake-plantuml.sh");
    std::fs::write(
        &p,
        "#!/bin/sh\nout=\"${2%.puml}.png\"\nprintf '\\211PNG\\r\\n\\032\\nfake' > \"$out\"\n",
    )
    .unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

/// Lines `## 1.` .. `## 8.` in order.
pub fn top_headings(doc: &str) -> Vec<String> {
    doc.lines()
        .filter(|l| l.starts_with("## ") && l[3..].chars().next().is_some_and(|c| c.is_ascii_digit()))
        .map(str::to_owned)
        .collect()
}

/// For each required diagram slot, the first non-blank line after it.
pub fn slot_contents(doc: &str) -> Vec<(String, String)> {
    let lines: Vec<&str> = doc.lines().collect();
    ["### 2.1 ", "### 3.1 ", "### 5.1 ", "### 8.1 "]
        .iter()
        .map(|slot| {
            let i = lines.iter().position(|l| l.starts_with(slot)).map(|i| i + 1);
            let next = i
                .and_then(|i| lines[i..].iter().find(|l| !l.trim().is_empty()))
                .map(|l| l.to_string())
                .unwrap_or_default();
            (slot.trim().to_owned(), next)
        })
        .collect()
}
