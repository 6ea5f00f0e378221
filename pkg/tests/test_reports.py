import os

from openpyxl import load_workbook

from costs import QuadraticF
from measures import DiscreteMeasure
from primal import solve_primal
from reports import MAX_PDF_ROWS, ReportGenerator


def _solution():
    mu = DiscreteMeasure.midpoint_grid(MAX_PDF_ROWS + 5, -1.0, 1.0)
    nu = DiscreteMeasure([[1.0], [2.0]], [0.5, 0.5])
    return solve_primal(QuadraticF(mu.atoms, nu.atoms), mu, nu), mu


def test_solution_pdf(tmp_path):
    report, mu = _solution()
    path = ReportGenerator(str(tmp_path)).generate_solution_pdf(report, mu, 'solucao.pdf')
    assert path == os.path.join(str(tmp_path), 'solucao.pdf')
    with open(path, 'rb') as fh:
        assert fh.read(4) == b'%PDF'


def test_default_filename_goes_to_output_folder(output_dir):
    report, mu = _solution()
    path = ReportGenerator().generate_solution_pdf(report, mu)
    assert os.path.dirname(path) == str(output_dir)
    assert os.path.basename(path).startswith('solucao_')


def test_kernel_xlsx(tmp_path):
    report, mu = _solution()
    path = ReportGenerator(str(tmp_path)).generate_kernel_xlsx(report, mu, 'nucleo.xlsx')
    wb = load_workbook(path)
    assert wb.sheetnames == ['kernel', 'summary']
    kernel = wb['kernel']
    assert [c.value for c in kernel[1]] == ['i', 'mu', 'N', 'S_1', '0', '1']
    assert kernel.max_row == mu.n + 1
    summary = {row[0].value: row[1].value for row in wb['summary'].iter_rows()}
    assert summary['Método'] == 'qp'
    assert summary['Certificado'] == 'sim'
