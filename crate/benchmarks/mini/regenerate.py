#!/usr/bin/env python3
"""Writes the mini benchmark: buggy projects, fix directories, manifests and
the scripted mock responses.

Run from anywhere; output goes next to this file.
"""

import json
import re
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parent
TIMEOUT = 60

COMMENT = {"python": "#", "java": "//", "c": "//"}
TASK = "Provide a fix for the buggy function"

# Same-project few-shot pair for every bug of a language.
PROJECT_EXAMPLE = {
    "python": {
        "buggy": "def last(xs):\n    return xs[len(xs)]\n",
        "fixed": "def last(xs):\n    return xs[len(xs) - 1]\n",
    },
    "c": {
        "buggy": "int last(const int *xs, int n)\n{\n    return xs[n];\n}\n",
        "fixed": "int last(const int *xs, int n)\n{\n    return xs[n - 1];\n}\n",
    },
    "java": {
        "buggy": "public static int last(int[] xs) {\n    return xs[xs.length];\n}\n",
        "fixed": "public static int last(int[] xs) {\n    return xs[xs.length - 1];\n}\n",
    },
}

# Each bug: file name, function name, file header, buggy function, the
# function-relative hunk (1-based, inclusive), and hunk replacements for the
# correct, plausible-but-different, syntax-broken and build-broken variants.
BUGS = {
    "python": [
        dict(
            id="gcd",
            name="gcd",
            header='"""Greatest common divisor."""\n\n\n',
            function="def gcd(a, b):\n    while b > 1:\n        a, b = b, a % b\n    return a\n",
            hunk=(2, 2),
            correct="    while b != 0:\n",
            plausible="    while b > 0:\n",
            syntax="    while b != 0\n",
            semantic="    while b != zero:\n",
        ),
        dict(
            id="count_positives",
            name="count_positives",
            header='"""Counting helpers."""\n\n\n',
            function="def count_positives(xs):\n    n = 0\n    for x in xs:\n        if x >= 0:\n            n += 1\n    return n\n",
            hunk=(4, 4),
            correct="        if x > 0:\n",
            plausible="        if 0 < x:\n",
            syntax="        if x > 0\n",
            semantic="        if x > zero:\n",
        ),
        dict(
            id="sieve",
            name="sieve",
            header='"""Prime sieve."""\n\n\n',
            function=(
                "def sieve(n):\n"
                "    is_prime = [True] * (n + 1)\n"
                "    primes = []\n"
                "    for i in range(2, n + 1):\n"
                "        if is_prime[i]:\n"
                "            primes.append(i)\n"
                "            for j in range(i * i, n, i):\n"
                "                is_prime[j] = False\n"
                "    return primes\n"
            ),
            hunk=(7, 7),
            correct="            for j in range(i * i, n + 1, i):\n",
            plausible="            for j in range(2 * i, n + 1, i):\n",
            syntax="            for j in range(i * i, n + 1, i:\n",
            semantic="            for j in range(i * i, limit, i):\n",
        ),
        dict(
            id="max_sublist_sum",
            name="max_sublist_sum",
            header='"""Maximum contiguous sum."""\n\n\n',
            function=(
                "def max_sublist_sum(xs):\n"
                "    best = xs[0]\n"
                "    cur = 0\n"
                "    for x in xs:\n"
                "        cur = max(x, cur + x)\n"
                "        best = max(best, x)\n"
                "    return best\n"
            ),
            hunk=(6, 6),
            correct="        best = max(best, cur)\n",
            plausible="        best = max(cur, best)\n",
            syntax="        best = max(best, cur\n",
            semantic="        best = max(best, current)\n",
        ),
        dict(
            id="clamp_all",
            name="clamp_all",
            header='"""Clamping."""\n\n\n',
            function=(
                "def clamp_all(values, lo, hi):\n"
                "    out = []\n"
                "    for v in values:\n"
                "        if v < lo:\n"
                "            v = hi\n"
                "        elif v > hi:\n"
                "            v = lo\n"
                "        out.append(v)\n"
                "    return out\n"
            ),
            hunk=(5, 7),
            correct="            v = lo\n        elif v > hi:\n            v = hi\n",
            plausible="            v = lo\n        elif hi < v:\n            v = hi\n",
            syntax="            v = lo\n        elif v > hi\n            v = hi\n",
            semantic="            v = low\n        elif v > hi:\n            v = high\n",
        ),
    ],
    "c": [
        dict(
            id="gcd",
            name="gcd",
            header="/* Greatest common divisor. */\n\n",
            function=(
                "int gcd(int a, int b)\n"
                "{\n"
                "    while (b > 1) {\n"
                "        int t = a % b;\n"
                "        a = b;\n"
                "        b = t;\n"
                "    }\n"
                "    return a;\n"
                "}\n"
            ),
            hunk=(3, 3),
            correct="    while (b != 0) {\n",
            plausible="    while (b > 0) {\n",
            syntax="    while (b != 0 {\n",
            semantic="    while (b != zero) {\n",
        ),
        dict(
            id="count_positives",
            name="count_positives",
            header="/* Counting helpers. */\n\n",
            function=(
                "int count_positives(const int *xs, int n)\n"
                "{\n"
                "    int count = 0;\n"
                "    for (int i = 0; i < n; i++) {\n"
                "        if (xs[i] >= 0) {\n"
                "            count++;\n"
                "        }\n"
                "    }\n"
                "    return count;\n"
                "}\n"
            ),
            hunk=(5, 5),
            correct="        if (xs[i] > 0) {\n",
            plausible="        if (0 < xs[i]) {\n",
            syntax="        if (xs[i] > 0 {\n",
            semantic="        if (xs[i] > zero) {\n",
        ),
        dict(
            id="sieve",
            name="sieve",
            header="/* Prime sieve. */\n\n",
            function=(
                "int sieve(int n, int *primes)\n"
                "{\n"
                "    char composite[1024] = {0};\n"
                "    int count = 0;\n"
                "    for (int i = 2; i <= n; i++) {\n"
                "        if (!composite[i]) {\n"
                "            primes[count++] = i;\n"
                "            for (int j = i * i; j < n; j += i) {\n"
                "                composite[j] = 1;\n"
                "            }\n"
                "        }\n"
                "    }\n"
                "    return count;\n"
                "}\n"
            ),
            hunk=(8, 8),
            correct="            for (int j = i * i; j <= n; j += i) {\n",
            plausible="            for (int j = 2 * i; j <= n; j += i) {\n",
            syntax="            for (int j = i * i; j <= n; j += i {\n",
            semantic="            for (int j = i * i; j <= limit; j += i) {\n",
        ),
        dict(
            id="max_sublist_sum",
            name="max_sublist_sum",
            header="/* Maximum contiguous sum. */\n\n",
            function=(
                "int max_sublist_sum(const int *xs, int n)\n"
                "{\n"
                "    int best = xs[0];\n"
                "    int cur = 0;\n"
                "    for (int i = 0; i < n; i++) {\n"
                "        cur = xs[i] > cur + xs[i] ? xs[i] : cur + xs[i];\n"
                "        best = best > xs[i] ? best : xs[i];\n"
                "    }\n"
                "    return best;\n"
                "}\n"
            ),
            hunk=(7, 7),
            correct="        best = best > cur ? best : cur;\n",
            plausible="        best = cur > best ? cur : best;\n",
            syntax="        best = best > cur ? best : ;\n",
            semantic="        best = best > current ? best : current;\n",
        ),
        dict(
            id="clamp_all",
            name="clamp_all",
            header="/* Clamping. */\n\n",
            function=(
                "void clamp_all(int *values, int n, int lo, int hi)\n"
                "{\n"
                "    for (int i = 0; i < n; i++) {\n"
                "        if (values[i] < lo) {\n"
                "            values[i] = hi;\n"
                "        } else if (values[i] > hi) {\n"
                "            values[i] = lo;\n"
                "        }\n"
                "    }\n"
                "}\n"
            ),
            hunk=(5, 7),
            correct="            values[i] = lo;\n        } else if (values[i] > hi) {\n            values[i] = hi;\n",
            plausible="            values[i] = lo;\n        } else if (hi < values[i]) {\n            values[i] = hi;\n",
            syntax="            values[i] = lo;\n        } else if (values[i] > hi {\n            values[i] = hi;\n",
            semantic="            values[i] = low;\n        } else if (values[i] > hi) {\n            values[i] = high;\n",
        ),
    ],
    "java": [
        dict(
            id="gcd",
            name="gcd",
            cls="Gcd",
            function=(
                "    public static int gcd(int a, int b) {\n"
                "        while (b > 1) {\n"
                "            int t = a % b;\n"
                "            a = b;\n"
                "            b = t;\n"
                "        }\n"
                "        return a;\n"
                "    }\n"
            ),
            hunk=(2, 2),
            correct="        while (b != 0) {\n",
            plausible="        while (b > 0) {\n",
            syntax="        while (b != 0 {\n",
            semantic="        while (b != zero) {\n",
        ),
        dict(
            id="count_positives",
            name="countPositives",
            cls="Counting",
            function=(
                "    public static int countPositives(int[] xs) {\n"
                "        int count = 0;\n"
                "        for (int x : xs) {\n"
                "            if (x >= 0) {\n"
                "                count++;\n"
                "            }\n"
                "        }\n"
                "        return count;\n"
                "    }\n"
            ),
            hunk=(4, 4),
            correct="            if (x > 0) {\n",
            plausible="            if (0 < x) {\n",
            syntax="            if (x > 0 {\n",
            semantic="            if (x > zero) {\n",
        ),
        dict(
            id="sieve",
            name="sieve",
            cls="Sieve",
            function=(
                "    public static List<Integer> sieve(int n) {\n"
                "        boolean[] composite = new boolean[n + 1];\n"
                "        List<Integer> primes = new ArrayList<>();\n"
                "        for (int i = 2; i <= n; i++) {\n"
                "            if (!composite[i]) {\n"
                "                primes.add(i);\n"
                "                for (int j = i * i; j < n; j += i) {\n"
                "                    composite[j] = true;\n"
                "                }\n"
                "            }\n"
                "        }\n"
                "        return primes;\n"
                "    }\n"
            ),
            hunk=(7, 7),
            correct="                for (int j = i * i; j <= n; j += i) {\n",
            plausible="                for (int j = 2 * i; j <= n; j += i) {\n",
            syntax="                for (int j = i * i; j <= n; j += i {\n",
            semantic="                for (int j = i * i; j <= limit; j += i) {\n",
            imports="import java.util.ArrayList;\nimport java.util.List;\n\n",
        ),
        dict(
            id="max_sublist_sum",
            name="maxSublistSum",
            cls="Sublists",
            function=(
                "    public static int maxSublistSum(int[] xs) {\n"
                "        int best = xs[0];\n"
                "        int cur = 0;\n"
                "        for (int x : xs) {\n"
                "            cur = Math.max(x, cur + x);\n"
                "            best = Math.max(best, x);\n"
                "        }\n"
                "        return best;\n"
                "    }\n"
            ),
            hunk=(6, 6),
            correct="            best = Math.max(best, cur);\n",
            plausible="            best = Math.max(cur, best);\n",
            syntax="            best = Math.max(best, cur;\n",
            semantic="            best = Math.max(best, current);\n",
        ),
        dict(
            id="clamp_all",
            name="clampAll",
            cls="Clamp",
            function=(
                "    public static void clampAll(int[] values, int lo, int hi) {\n"
                "        for (int i = 0; i < values.length; i++) {\n"
                "            if (values[i] < lo) {\n"
                "                values[i] = hi;\n"
                "            } else if (values[i] > hi) {\n"
                "                values[i] = lo;\n"
                "            }\n"
                "        }\n"
                "    }\n"
            ),
            hunk=(4, 6),
            correct="                values[i] = lo;\n            } else if (values[i] > hi) {\n                values[i] = hi;\n",
            plausible="                values[i] = lo;\n            } else if (hi < values[i]) {\n                values[i] = hi;\n",
            syntax="                values[i] = lo;\n            } else if (values[i] > hi {\n                values[i] = hi;\n",
            semantic="                values[i] = low;\n            } else if (values[i] > hi) {\n                values[i] = high;\n",
        ),
    ],
}

PY_TESTS = {
    "gcd": [("test_coprime", "gcd(3, 2)", "1"), ("test_common", "gcd(12, 18)", "6"), ("test_zero", "gcd(5, 0)", "5")],
    "count_positives": [("test_mixed", "count_positives([-1, 0, 2, 3])", "2"), ("test_empty", "count_positives([])", "0")],
    "sieve": [("test_ten", "sieve(10)", "[2, 3, 5, 7]"), ("test_nine", "sieve(9)", "[2, 3, 5, 7]"), ("test_small", "sieve(2)", "[2]")],
    "max_sublist_sum": [("test_gap", "max_sublist_sum([1, 2, -1, 3])", "5"), ("test_negative", "max_sublist_sum([-3, -1, -2])", "-1")],
    "clamp_all": [("test_both_sides", "clamp_all([-5, 3, 12], 0, 10)", "[0, 3, 10]"), ("test_inside", "clamp_all([1, 2], 0, 10)", "[1, 2]")],
}

C_TESTS = {
    "gcd": ("int gcd(int a, int b);\n", [("gcd_coprime", "gcd(3, 2) == 1"), ("gcd_common", "gcd(12, 18) == 6"), ("gcd_zero", "gcd(5, 0) == 5")], ""),
    "count_positives": (
        "int count_positives(const int *xs, int n);\n",
        [("count_mixed", "count_positives(mixed, 4) == 2")],
        "    int mixed[] = {-1, 0, 2, 3};\n",
    ),
    "sieve": (
        "int sieve(int n, int *primes);\n",
        [("sieve_ten", "sieve(10, primes) == 4 && primes[3] == 7"), ("sieve_nine", "sieve(9, primes) == 4")],
        "    int primes[64];\n",
    ),
    "max_sublist_sum": (
        "int max_sublist_sum(const int *xs, int n);\n",
        [("sublist_gap", "max_sublist_sum(gap, 4) == 5"), ("sublist_negative", "max_sublist_sum(neg, 3) == -1")],
        "    int gap[] = {1, 2, -1, 3};\n    int neg[] = {-3, -1, -2};\n",
    ),
    "clamp_all": (
        "void clamp_all(int *values, int n, int lo, int hi);\n",
        [("clamp_both_sides", "(clamp_all(v, 3, 0, 10), v[0] == 0 && v[1] == 3 && v[2] == 10)")],
        "    int v[] = {-5, 3, 12};\n",
    ),
}

JAVA_TESTS = {
    "gcd": ["Gcd.gcd(3, 2) == 1", "Gcd.gcd(12, 18) == 6", "Gcd.gcd(5, 0) == 5"],
    "count_positives": ["Counting.countPositives(new int[] {-1, 0, 2, 3}) == 2"],
    "sieve": ["Sieve.sieve(10).equals(List.of(2, 3, 5, 7))", "Sieve.sieve(9).equals(List.of(2, 3, 5, 7))"],
    "max_sublist_sum": ["Sublists.maxSublistSum(new int[] {1, 2, -1, 3}) == 5", "Sublists.maxSublistSum(new int[] {-3, -1, -2}) == -1"],
    "clamp_all": ["clamped(new int[] {-5, 3, 12}).equals(List.of(0, 3, 10))"],
}

NAMECHECK = '''"""Fails when a function reads a name that is defined nowhere."""

import ast
import builtins
import sys


def bound_names(node):
    names = set()
    for child in ast.walk(node):
        if isinstance(child, ast.Name) and isinstance(child.ctx, (ast.Store, ast.Del)):
            names.add(child.id)
        elif isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(child.name)
        elif isinstance(child, ast.arg):
            names.add(child.arg)
        elif isinstance(child, ast.alias):
            names.add((child.asname or child.name).split(".")[0])
        elif isinstance(child, ast.ExceptHandler) and child.name:
            names.add(child.name)
    return names


def main(paths):
    status = 0
    for path in paths:
        with open(path, encoding="utf-8") as f:
            source = f.read()
        try:
            tree = ast.parse(source, path)
            compile(tree, path, "exec")
        except SyntaxError as e:
            print(f"{path}:{e.lineno}: {e.msg}")
            status = 1
            continue
        known = bound_names(tree) | set(dir(builtins))
        for node in ast.walk(tree):
            if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Load) and node.id not in known:
                print(f"{path}:{node.lineno}: undefined name {node.id!r}")
                status = 1
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
'''


def segment(text):
    tokens = re.findall(r"\s*\S+", text)
    if not tokens:
        return [text] if text else []
    rest = text[sum(len(t) for t in tokens):]
    tokens[-1] += rest
    return tokens


def response(text, logprob):
    return {"text": text, "logprobs": [logprob] * len(segment(text))}


def split_function(bug):
    lines = bug["function"].splitlines(keepends=True)
    start, end = bug["hunk"]
    return "".join(lines[: start - 1]), "".join(lines[start - 1 : end]), "".join(lines[end:])


def with_hunk(bug, hunk):
    prefix, _, suffix = split_function(bug)
    return prefix + hunk + suffix


def java_file(bug, function):
    return f"{bug.get('imports', '')}public class {bug['cls']} {{\n{function}}}\n"


def source_file(lang, bug, function):
    if lang == "java":
        return java_file(bug, function)
    return bug["header"] + function


def file_name(lang, bug):
    if lang == "java":
        return bug["cls"] + ".java"
    return bug["id"] + (".py" if lang == "python" else ".c")


def header_lines(lang, bug):
    if lang == "java":
        return bug.get("imports", "").count("\n") + 1
    return bug["header"].count("\n")


def python_test(bug):
    cases = "".join(
        f"    def {name}(self):\n        self.assertEqual({call}, {want})\n\n" for name, call, want in PY_TESTS[bug["id"]]
    )
    return (
        f"import unittest\n\nfrom {bug['id']} import {bug['name']}\n\n\n"
        f"class {bug['id'].title().replace('_', '')}Test(unittest.TestCase):\n{cases.rstrip()}\n\n\n"
        'if __name__ == "__main__":\n    unittest.main()\n'
    )


def c_test(bug):
    proto, checks, setup = C_TESTS[bug["id"]]
    body = "".join(f'    check("{name}", {expr});\n' for name, expr in checks)
    return (
        "#include <stdio.h>\n\n"
        f"{proto}\n"
        "static int failures;\n\n"
        "static void check(const char *name, int ok)\n{\n"
        "    if (!ok) {\n        printf(\"FAIL: %s\\n\", name);\n        failures++;\n    }\n}\n\n"
        f"int main(void)\n{{\n{setup}{body}    return failures != 0;\n}}\n"
    )


def java_test(bug):
    checks = "".join(
        f'        check({i}, {expr});\n' for i, expr in enumerate(JAVA_TESTS[bug["id"]])
    )
    helper = ""
    if bug["id"] == "clamp_all":
        helper = (
            "    static List<Integer> clamped(int[] values) {\n"
            "        Clamp.clampAll(values, 0, 10);\n"
            "        List<Integer> out = new ArrayList<>();\n"
            "        for (int v : values) {\n            out.add(v);\n        }\n"
            "        return out;\n    }\n\n"
        )
    return (
        "import java.util.ArrayList;\nimport java.util.List;\n\n"
        f"public class {bug['cls']}Test {{\n"
        "    static int failures = 0;\n\n"
        "    static void check(int id, boolean ok) {\n"
        "        if (!ok) {\n"
        f'            System.out.println("FAIL: {bug["cls"]}Test." + id);\n'
        "            failures++;\n        }\n    }\n\n"
        f"{helper}"
        "    public static void main(String[] args) {\n"
        f"{checks}"
        "        System.exit(failures == 0 ? 0 : 1);\n    }\n}\n"
    )


def commands(lang, bug):
    name = file_name(lang, bug)
    if lang == "python":
        return (f"python3 namecheck.py {name}", f"python3 -m unittest -q test_{bug['id']}")
    if lang == "c":
        return (
            f"cc -std=c99 -fsyntax-only -Werror=implicit-function-declaration {name}",
            f"cc -std=c99 -o test_{bug['id']} {name} test_{bug['id']}.c && ./test_{bug['id']}",
        )
    cls = bug["cls"]
    return (
        f"mkdir -p out && javac -d out {cls}.java",
        f"mkdir -p out && javac -d out {cls}.java {cls}Test.java && java -cp out {cls}Test",
    )


def signature(bug):
    return bug["function"].splitlines()[0].strip()


def matcher(lang, bug, kind):
    sig = signature(bug)
    # C and Java signatures can nest (`int f(` inside `static int f(`).
    longer = sorted(
        {signature(b) for bugs in BUGS.values() for b in bugs if sig in signature(b) and signature(b) != sig}
    )
    ident = [{"contains": sig}] + [{"not": {"contains": other}} for other in longer]
    task = {"contains": f"{COMMENT[lang]} {TASK}"}
    infill = {"contains": "<INFILL>"}
    if kind == "function":
        return {"all": [task] + ident}
    if kind == "infill":
        return {"all": [infill] + ident + [{"not": task}]}
    return {"all": ident + [{"not": infill}, {"not": task}]}


def mock_rules(lang, bug):
    variants = [
        ("correct", -0.05),
        ("syntax", -0.9),
        ("semantic", -0.7),
        ("plausible", -0.3),
    ]
    _, _, suffix = split_function(bug)
    stop_tail = f"\n{COMMENT[lang]} Buggy Function\n"
    rules = []
    rules.append(
        {
            "match": matcher(lang, bug, "function"),
            "responses": [response(with_hunk(bug, bug[v]) + stop_tail, lp) for v, lp in variants],
        }
    )
    rules.append(
        {
            "match": matcher(lang, bug, "infill"),
            "responses": [response(bug[v], lp) for v, lp in variants],
        }
    )
    start, end = bug["hunk"]
    if start == end:
        follow = suffix.splitlines(keepends=True)[0] if suffix else ""
        rules.append(
            {
                "match": matcher(lang, bug, "line"),
                "responses": [response(bug[v] + follow, lp) for v, lp in variants],
            }
        )
    return rules


def main():
    manifests = {}
    script = []
    for lang, bugs in BUGS.items():
        project = ROOT / lang
        fixes = ROOT / "fixes" / lang
        for d in (project, fixes):
            if d.exists():
                shutil.rmtree(d)
            d.mkdir(parents=True)
        if lang == "python":
            (project / "namecheck.py").write_text(NAMECHECK)
        records = []
        for bug in bugs:
            name = file_name(lang, bug)
            buggy = source_file(lang, bug, bug["function"])
            fixed_function = with_hunk(bug, bug["correct"])
            fixed = source_file(lang, bug, fixed_function)
            (project / name).write_text(buggy)
            if lang == "python":
                (project / f"test_{bug['id']}.py").write_text(python_test(bug))
            elif lang == "c":
                (project / f"test_{bug['id']}.c").write_text(c_test(bug))
            else:
                (project / f"{bug['cls']}Test.java").write_text(java_test(bug))

            offset = header_lines(lang, bug)
            n = bug["function"].count("\n")
            function_span = {"start": offset + 1, "end": offset + n}
            hs, he = bug["hunk"]
            build, test = commands(lang, bug)

            fix_dir = fixes / bug["id"]
            fix_dir.mkdir()
            (fix_dir / name).write_text(fixed)
            meta = {
                "id": f"{lang}-{bug['id']}",
                "language": lang,
                "buggy_file": f"../../../{lang}/{name}",
                "fixed_file": name,
                "function_span": function_span,
                "project_root": f"../../../{lang}",
                "project_example": PROJECT_EXAMPLE[lang],
                "build_command": build,
                "test_command": test,
                "timeout_seconds": TIMEOUT,
            }
            (fix_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

            records.append(
                {
                    "id": f"{lang}-{bug['id']}",
                    "language": lang,
                    "source_path": f"{lang}/{name}",
                    "project_root": lang,
                    "function_span": function_span,
                    "hunk_span": {"start": offset + hs, "end": offset + he},
                    "reference_patch": fixed_function,
                    "project_example": PROJECT_EXAMPLE[lang],
                    "build_command": build,
                    "test_command": test,
                    "timeout_seconds": TIMEOUT,
                }
            )
            script.extend(mock_rules(lang, bug))
        manifests[lang] = records

    for lang, records in manifests.items():
        with open(ROOT / f"{lang}.jsonl", "w") as f:
            for r in records:
                f.write(json.dumps(r) + "\n")
    combined = {"mini.jsonl": list(manifests), "python_c.jsonl": ["python", "c"]}
    for name, langs in combined.items():
        with open(ROOT / name, "w") as f:
            for lang in langs:
                for r in manifests[lang]:
                    f.write(json.dumps(r) + "\n")
    with open(ROOT / "mock.jsonl", "w") as f:
        for rule in script:
            f.write(json.dumps(rule) + "\n")


if __name__ == "__main__":
    main()
