#!/usr/bin/env python3
"""
Installation checker for lsq
Run this script to verify all dependencies are correctly installed
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def check_package(package_name, import_name=None):
    """Check if a package is installed and can be imported"""
    if import_name is None:
        import_name = package_name

    print(f"Checking {package_name}...", end=" ")

    try:
        module = __import__(import_name)
        version = getattr(module, "__version__", "unknown version")
        print(f"✅ OK ({version})")
        return True
    except ImportError as e:
        print(f"❌ FAILED - {e}")
        return False


def check_hadamard():
    """Reduce H ket0 end to end and compare with the expected state"""
    print("Checking H ket0 reduces to ket+...", end=" ")

    try:
        from src.ls_core import App
        from src.ls_reduce import normalize
        from src.ls_vec import gate, state

        result, trace = normalize(App(gate("H"), state("ket0")))
        if str(result) != "[star(1/sqrt2), star(1/sqrt2)]":
            print(f"❌ FAILED - got {result}")
            return False
        print(f"✅ OK ({trace.step_count} steps)")
        return True
    except Exception as e:
        print(f"❌ FAILED - {e}")
        return False


def main():
    print("🔍 lsq Installation Checker")
    print("=" * 40)

    all_good = True

    # Check core dependencies
    dependencies = [
        ("click", "click"),
        ("numpy", "numpy"),
        ("pandas", "pandas"),
        ("lark", "lark"),
    ]

    for package_name, import_name in dependencies:
        if not check_package(package_name, import_name):
            all_good = False

    if all_good and not check_hadamard():
        all_good = False

    # Check optional development dependencies
    print("\nOptional dependencies:")
    dev_deps = [
        ("pytest", "pytest"),
        ("hypothesis", "hypothesis"),
        ("black", "black"),
        ("flake8", "flake8"),
    ]

    for package_name, import_name in dev_deps:
        check_package(package_name, import_name)

    print("\n" + "=" * 40)

    if all_good:
        print("🎉 All core dependencies are correctly installed!")
        print("You can now run: lsq --help")
    else:
        print("❌ Some dependencies are missing or incorrect.")
        print("Please install missing packages and run this check again.")

    return 0 if all_good else 1


if __name__ == "__main__":
    sys.exit(main())
