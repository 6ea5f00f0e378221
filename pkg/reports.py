"""
Módulo de Relatórios - Solver de Transporte Ótimo Fraco
=======================================================

Este módulo gera o resumo de uma solução em PDF (reportlab) e o núcleo
ótimo em planilha XLSX (openpyxl).
"""

import os
from datetime import datetime

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from config import Config
from utils import FileUtils, NumberUtils

# PDFs grandes ficam ilegíveis; o XLSX traz o núcleo completo
MAX_PDF_ROWS = 60


class ReportGenerator:
    """Gerador de relatórios de solução"""

    def __init__(self, reports_folder=None):
        self.reports_folder = reports_folder or Config.OUTPUT_FOLDER
        FileUtils.ensure_directory(self.reports_folder)
        self.styles = getSampleStyleSheet()

    def _path(self, filename, prefix, ext):
        if not filename:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            filename = f"{prefix}_{timestamp}.{ext}"
        if os.path.dirname(filename):
            FileUtils.ensure_directory(os.path.dirname(filename))
            return filename
        return os.path.join(self.reports_folder, FileUtils.get_safe_filename(filename))

    @staticmethod
    def _summary_rows(report):
        fmt = NumberUtils.format_float
        return [
            ['Método', report.method],
            ['Valor primal', fmt(report.primal_value)],
            ['Valor dual', fmt(report.dual_value)],
            ['Gap', fmt(report.gap)],
            ['Iterações', str(report.iterations)],
            ['Certificado', 'sim' if report.certified else 'não'],
        ]

    @staticmethod
    def _atom_rows(report, mu):
        fmt = NumberUtils.format_float
        N, S = report.plan.N, report.plan.S
        rows = []
        for i in range(mu.n):
            x = ', '.join(f'{v:.6g}' for v in mu.atoms[i])
            s = ', '.join(f'{v:.6g}' for v in S[i])
            rows.append([str(i), x, fmt(mu.weights[i]), f'{N[i]:.6g}', s])
        return rows

    def generate_solution_pdf(self, report, mu, filename=None, title=None):
        """Gera o resumo da solução em PDF"""
        filepath = self._path(filename, 'solucao', 'pdf')
        doc = SimpleDocTemplate(filepath, pagesize=A4)
        elements = []

        title_style = ParagraphStyle(
            'CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=18,
            spaceAfter=30,
            alignment=1  # Centralizado
        )
        elements.append(Paragraph(title or "Transporte Ótimo Fraco - Solução", title_style))
        elements.append(Paragraph(f"Gerado em: {datetime.now().strftime('%d/%m/%Y %H:%M')}",
                                  self.styles['Normal']))
        elements.append(Spacer(1, 20))

        summary = Table(self._summary_rows(report))
        summary.setStyle(TableStyle([
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
        ]))
        elements.append(summary)
        elements.append(Spacer(1, 20))

        rows = self._atom_rows(report, mu)
        if rows:
            data = [['i', 'x_i', 'μ_i', 'N_i', 'S_i']] + rows[:MAX_PDF_ROWS]
            table = Table(data)
            table.setStyle(TableStyle([
                ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
                ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
                ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
                ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
                ('BOTTOMPADDING', (0, 0), (-1, 0), 12),
                ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
                ('GRID', (0, 0), (-1, -1), 1, colors.black)
            ]))
            elements.append(table)
            if len(rows) > MAX_PDF_ROWS:
                elements.append(Paragraph(f"... {len(rows) - MAX_PDF_ROWS} átomos omitidos",
                                          self.styles['Normal']))

        doc.build(elements)
        return filepath

    def generate_kernel_xlsx(self, report, mu, filename=None):
        """Planilha com abas 'kernel' (layout do CSV) e 'summary'"""
        filepath = self._path(filename, 'nucleo', 'xlsx')
        plan = report.plan
        d = plan.y_atoms.shape[1]
        m = plan.Q.shape[1]

        wb = Workbook()
        ws = wb.active
        ws.title = "kernel"

        header_font = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(start_color="0066CC", end_color="0066CC", fill_type="solid")
        thin_border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

        headers = ['i', 'mu', 'N'] + [f'S_{k + 1}' for k in range(d)] + [str(j) for j in range(m)]
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal='center')
            cell.border = thin_border

        N, S = plan.N, plan.S
        for row_num, i in enumerate(range(plan.Q.shape[0]), 2):
            values = [i, float(mu.weights[i]), float(N[i])] + [float(v) for v in S[i]] \
                + [float(q) for q in plan.Q[i]]
            for col, value in enumerate(values, 1):
                ws.cell(row=row_num, column=col, value=value).border = thin_border

        summary = wb.create_sheet("summary")
        for row_num, (label, value) in enumerate(self._summary_rows(report), 1):
            summary.cell(row=row_num, column=1, value=label).font = Font(bold=True)
            summary.cell(row=row_num, column=2, value=value)
        summary.column_dimensions['A'].width = 18
        summary.column_dimensions['B'].width = 28

        wb.save(filepath)
        return filepath
