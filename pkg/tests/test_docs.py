'''Test that the API pages cover the package

Copyright primerace developers, 2026'''

from pathlib import Path
import re

testsPath = Path(__file__).parent
apidoc = testsPath.parent / 'apidoc'
package = testsPath.parent / 'src' / 'primerace'


def test_every_module_has_a_page():
    modules = {p.stem for p in package.glob('*.py') if not p.stem.startswith('_')}
    pages = {p.stem.split('.', 1)[1] for p in apidoc.glob('primerace.*.rst')}
    assert modules == pages

    toctree = (apidoc / 'primerace.rst').read_text()
    for name in modules:
        assert f'primerace.{name}\n' in toctree
        assert f'.. automodule:: primerace.{name}' in (apidoc / f'primerace.{name}.rst').read_text()


def test_conf_paths_exist():
    conf = (apidoc / 'conf.py').read_text()
    assert "sys.path.insert(0, os.path.abspath('../src'))" in conf
    for listed in re.findall(r"_path = \[([^\]]*)\]", conf):
        for entry in re.findall(r"'([^']+)'", listed):
            assert (apidoc / entry).is_dir()
