"""Child-process entry point for sandboxed candidate execution.

Run as a standalone script by judge.py, never imported by the package:

    python -S -s -B _sandbox_runner.py <mode> <source> <status> <time_ms> <mem_kib>

mode is "compile" (parse/byte-compile only) or "run" (execute with stdin
already redirected by the parent). Resource limits are applied in-process;
the wall clock is enforced by the parent. A small JSON status file reports
the outcome and peak memory so the parent can tell MLE from RE.

Exit codes: 0 ok / accepted-compile, 1 failed (syntax error, uncaught
exception, nonzero sys.exit), 2 memory-limit allocation failure.
"""

import builtins
import json
import os
import resource
import sys
import traceback

MAX_OUTPUT_BYTES = 64 * 1024 * 1024

_real_open = builtins.open


def _apply_rlimits(time_ms, mem_kib):
    # CPU limit is a backstop only; the parent kills on wall clock first.
    cpu_s = (time_ms + 999) // 1000 + 1
    resource.setrlimit(resource.RLIMIT_CPU, (cpu_s, cpu_s + 1))
    resource.setrlimit(resource.RLIMIT_AS, (mem_kib * 1024, mem_kib * 1024))
    resource.setrlimit(resource.RLIMIT_FSIZE, (MAX_OUTPUT_BYTES, MAX_OUTPUT_BYTES))
    resource.setrlimit(resource.RLIMIT_CORE, (0, 0))


def _install_guards():
    scratch = os.path.realpath(os.getcwd())
    prefix = scratch + os.sep

    def deny_outside(path):
        resolved = os.path.realpath(os.fsdecode(os.fspath(path)))
        if resolved != scratch and not resolved.startswith(prefix):
            raise PermissionError(f"write access outside working directory: {resolved}")

    def guarded_open(file, mode="r", *args, **kwargs):
        if isinstance(file, (str, bytes, os.PathLike)):
            if any(ch in str(mode) for ch in "wxa+"):
                deny_outside(file)
        return _real_open(file, mode, *args, **kwargs)

    real_os_open = os.open
    write_flags = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND

    def guarded_os_open(path, flags, *args, **kwargs):
        if flags & write_flags:
            deny_outside(path)
        return real_os_open(path, flags, *args, **kwargs)

    def guarded_mutator(real):
        def wrapper(path, *args, **kwargs):
            deny_outside(path)
            return real(path, *args, **kwargs)

        return wrapper

    import io

    builtins.open = guarded_open
    io.open = guarded_open
    os.open = guarded_os_open
    for name in ("remove", "unlink", "rename", "replace", "rmdir", "mkdir",
                 "makedirs", "truncate", "link", "symlink", "chmod"):
        if hasattr(os, name):
            setattr(os, name, guarded_mutator(getattr(os, name)))

    def blocked(*args, **kwargs):
        raise PermissionError("process spawning is disabled in the sandbox")

    for name in ("fork", "forkpty", "posix_spawn", "posix_spawnp", "system", "popen",
                 "execv", "execve", "execvp", "execvpe", "execl", "execle",
                 "execlp", "execlpe", "spawnv", "spawnve", "spawnvp", "spawnvpe",
                 "spawnl", "spawnle", "spawnlp", "spawnlpe"):
        if hasattr(os, name):
            setattr(os, name, blocked)

    # Poisoned entries make any later import of these raise ImportError.
    for name in ("socket", "_socket", "ssl", "subprocess", "_posixsubprocess",
                 "multiprocessing", "ctypes", "_ctypes"):
        sys.modules[name] = None


def main():
    mode, source_path, status_path, time_ms, mem_kib = sys.argv[1:6]
    _apply_rlimits(int(time_ms), int(mem_kib))
    with _real_open(source_path, "rb") as fh:
        source = fh.read()

    status = {"outcome": "boot", "exc_type": None, "peak_kib": None}
    rc = 0
    try:
        if mode == "compile":
            try:
                compile(source, "main.py", "exec")
                status["outcome"] = "compilable"
            except Exception as exc:
                status["outcome"] = "not_compilable"
                status["exc_type"] = type(exc).__name__
                rc = 1
        elif mode == "run":
            code = compile(source, "main.py", "exec")
            _install_guards()
            sys.argv = ["main.py"]
            module_globals = {"__name__": "__main__", "__file__": "main.py"}
            try:
                exec(code, module_globals)
                status["outcome"] = "ok"
            except SystemExit as exc:
                if exc.code in (None, 0):
                    status["outcome"] = "ok"
                else:
                    status["outcome"] = "exit"
                    rc = exc.code if isinstance(exc.code, int) else 1
            except MemoryError:
                status["outcome"] = "mle"
                rc = 2
            except BaseException as exc:
                status["outcome"] = "exc"
                status["exc_type"] = type(exc).__name__
                traceback.print_exc()
                rc = 1
        else:
            raise SystemExit(f"unknown mode {mode!r}")
    finally:
        try:
            status["peak_kib"] = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
            with _real_open(status_path, "w") as fh:
                json.dump(status, fh)
        except Exception:
            pass
        try:
            sys.stdout.flush()
        except Exception:
            pass
    sys.exit(rc)


if __name__ == "__main__":
    # Drop this file's directory from sys.path so candidate programs cannot
    # shadow-import harness modules.
    here = os.path.dirname(os.path.abspath(__file__))
    sys.path = [p for p in sys.path if os.path.abspath(p or ".") != here]
    main()
