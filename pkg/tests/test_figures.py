from secheader.figures import plot_prevalence, plot_security
from secheader.report import PrevalenceTable, SecurityTable, catalog_security_table

PNG = b"\x89PNG\r\n\x1a\n"


def test_security_figure_is_deterministic(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    plot_security(catalog_security_table(), a)
    plot_security(catalog_security_table(), b)
    assert a.read_bytes().startswith(PNG)
    assert a.read_bytes() == b.read_bytes()


def test_empty_tables_still_render(tmp_path):
    plot_prevalence(PrevalenceTable(()), tmp_path / "p.png")
    plot_security(SecurityTable(()), tmp_path / "s.png")
    assert (tmp_path / "p.png").read_bytes().startswith(PNG)
    assert (tmp_path / "s.png").read_bytes().startswith(PNG)
