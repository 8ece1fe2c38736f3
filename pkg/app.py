"""
app.py - Interface Streamlit para explorar execucoes do FedSiam.

Le diretorios gravados por `fedsiam.py run` (metrics.csv, config.snapshot,
fsm_log.csv) e mostra curvas de acuracia, custo de comunicacao, a tabela
comparativa e a evolucao do FSM por camada.
"""

from pathlib import Path

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import streamlit as st

from src.constants import (
    APP_ICON,
    APP_SUBTITLE,
    APP_TITLE,
    COL_BEST_ACC,
    COL_BOUNDARY,
    COL_COMM_TOTAL,
    COL_FINAL_ACC,
    COL_FSM,
    COL_LAYER,
    COL_ROUND,
    COL_SKIPPED,
    COL_TAU,
    COL_TEST_ACC,
    COL_UPLOAD_CUM,
    COL_UPLOAD_TOTAL,
    TAB_COMPARACAO,
    TAB_COMUNICACAO,
    TAB_CURVAS,
    TAB_FSM,
)
from src.errors import FedSiamError
from src.experiment import find_run_dirs, load_run
from src.export import comparison_sheets, timestamped_name, to_csv_bytes, to_excel_bytes
from src.reports import compare_runs, round_rows, summarize_metrics


# =============================================================================
# CONFIGURACAO DA PAGINA
# =============================================================================
st.set_page_config(
    page_title=APP_TITLE,
    page_icon=APP_ICON,
    layout="wide",
    initial_sidebar_state="expanded",
)

st.markdown("""
<style>
    .main .block-container {
        padding-top: 2rem;
        padding-bottom: 2rem;
    }
    .metric-container {
        background: linear-gradient(135deg, #1E1E2E 0%, #2D2D44 100%);
        border-radius: 16px;
        padding: 1.5rem;
        border: 1px solid rgba(108, 99, 255, 0.2);
    }
    .metric-value {
        font-size: 2.2rem;
        font-weight: 700;
        color: #6C63FF;
        margin: 0;
    }
    .metric-label {
        font-size: 0.9rem;
        color: #A0A0A0;
        margin-top: 0.5rem;
        text-transform: uppercase;
    }
    .main-title {
        background: linear-gradient(90deg, #6C63FF, #A855F7);
        -webkit-background-clip: text;
        -webkit-text-fill-color: transparent;
        font-size: 2.5rem;
        font-weight: 700;
    }
    .subtitle {
        color: #A0A0A0;
        font-size: 1.1rem;
        margin-bottom: 2rem;
    }
</style>
""", unsafe_allow_html=True)

COLORS = {
    'primary': '#6C63FF',
    'secondary': '#A855F7',
    'success': '#00D26A',
    'warning': '#FFC107',
    'danger': '#FF6B6B',
    'muted': '#A0A0A0',
}

CHART_COLORS = ['#6C63FF', '#A855F7', '#00D26A', '#00B4D8', '#FFC107', '#FF6B6B', '#FF8C42', '#4ECDC4']

LAYOUT_PADRAO = dict(
    paper_bgcolor='rgba(0,0,0,0)',
    plot_bgcolor='rgba(0,0,0,0)',
    margin=dict(t=30, b=20, l=20, r=20),
    height=380,
    legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1),
)

MIME_XLSX = "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"


# =============================================================================
# FUNCOES DE CACHE
# =============================================================================
@st.cache_data(show_spinner=False)
def carregar_execucao_cached(caminho: str, mtime: float):
    """Carrega um diretorio de execucao; mtime invalida o cache quando o run muda."""
    return load_run(caminho)


def _nome_execucao(run_dir: Path, raiz: Path) -> str:
    try:
        return str(run_dir.relative_to(raiz))
    except ValueError:
        return str(run_dir)


# =============================================================================
# GRAFICOS
# =============================================================================
def criar_grafico_acuracia(registros: dict) -> go.Figure:
    """Acuracia de teste por rodada, uma linha por execucao."""
    fig = go.Figure()
    for i, (nome, reg) in enumerate(registros.items()):
        linhas = round_rows(reg.metrics)
        fig.add_trace(go.Scatter(
            x=linhas[COL_ROUND],
            y=100 * linhas[COL_TEST_ACC],
            name=nome,
            mode='lines+markers',
            line=dict(color=CHART_COLORS[i % len(CHART_COLORS)], width=2),
            marker=dict(size=5),
        ))
    fig.update_layout(**LAYOUT_PADRAO, xaxis_title="Rodada", yaxis_title="Acuracia (%)")
    return fig


def criar_grafico_acuracia_comunicacao(registros: dict) -> go.Figure:
    """Acuracia em funcao dos escalares enviados acumulados."""
    fig = go.Figure()
    for i, (nome, reg) in enumerate(registros.items()):
        linhas = round_rows(reg.metrics)
        fig.add_trace(go.Scatter(
            x=linhas[COL_UPLOAD_CUM],
            y=100 * linhas[COL_TEST_ACC],
            name=nome,
            mode='lines',
            line=dict(color=CHART_COLORS[i % len(CHART_COLORS)], width=2),
        ))
    fig.update_layout(**LAYOUT_PADRAO, xaxis_title="Escalares enviados (acumulado)", yaxis_title="Acuracia (%)")
    return fig


def criar_grafico_upload_total(registros: dict) -> go.Figure:
    """Barras com o total enviado por execucao."""
    nomes = list(registros)
    totais = [summarize_metrics(r.metrics)[COL_UPLOAD_TOTAL] for r in registros.values()]
    fig = go.Figure(data=[go.Bar(x=nomes, y=totais, marker_color=CHART_COLORS[:len(nomes)])])
    fig.update_layout(**LAYOUT_PADRAO, yaxis_title="Escalares enviados")
    return fig


def criar_grafico_tau(registro) -> go.Figure:
    """tau aplicado por rodada."""
    linhas = round_rows(registro.metrics)
    fig = go.Figure(go.Scatter(
        x=linhas[COL_ROUND], y=pd.to_numeric(linhas[COL_TAU]),
        mode='lines+markers', line=dict(color=COLORS['secondary'], width=2),
    ))
    fig.update_layout(**LAYOUT_PADRAO, xaxis_title="Rodada", yaxis_title="tau")
    return fig


def criar_grafico_fsm(fsm_log: pd.DataFrame) -> go.Figure:
    """Mediana do FSM por camada e rodada, com a fronteira aplicada."""
    mediana = fsm_log.groupby([COL_ROUND, COL_LAYER], as_index=False)[COL_FSM].median()
    fig = px.line(mediana, x=COL_ROUND, y=COL_FSM, color=COL_LAYER, color_discrete_sequence=CHART_COLORS)
    fronteira = fsm_log.groupby(COL_ROUND, as_index=False)[COL_BOUNDARY].first()
    fronteira = fronteira[fronteira[COL_BOUNDARY] > float("-inf")]
    if not fronteira.empty:
        fig.add_trace(go.Scatter(
            x=fronteira[COL_ROUND], y=fronteira[COL_BOUNDARY], name="fronteira",
            mode='lines', line=dict(color=COLORS['danger'], dash='dash'),
        ))
    fig.update_layout(**LAYOUT_PADRAO, xaxis_title="Rodada", yaxis_title="FSM")
    return fig


# =============================================================================
# COMPONENTES DE UI
# =============================================================================
def render_metric_card(label, value, icon="📊"):
    """Renderiza um card de metrica customizado."""
    st.markdown(f"""
        <div class="metric-container">
            <div style="font-size: 1.5rem; margin-bottom: 0.5rem;">{icon}</div>
            <p class="metric-value">{value}</p>
            <p class="metric-label">{label}</p>
        </div>
    """, unsafe_allow_html=True)


def botoes_download(df: pd.DataFrame, prefixo: str, abas: dict = None):
    col1, col2, _ = st.columns([1, 1, 2])
    with col1:
        st.download_button(
            "📥 CSV",
            data=to_csv_bytes(df),
            file_name=timestamped_name(prefixo, "csv"),
            mime="text/csv",
            key=f"csv_{prefixo}",
        )
    with col2:
        st.download_button(
            "📥 Excel",
            data=to_excel_bytes(abas or {prefixo: df}),
            file_name=timestamped_name(prefixo, "xlsx"),
            mime=MIME_XLSX,
            key=f"xlsx_{prefixo}",
        )


# =============================================================================
# INTERFACE PRINCIPAL
# =============================================================================
def main():
    st.markdown(f'<h1 class="main-title">📈 {APP_TITLE}</h1>', unsafe_allow_html=True)
    st.markdown(f'<p class="subtitle">{APP_SUBTITLE}</p>', unsafe_allow_html=True)

    with st.sidebar:
        st.markdown("### 📁 Execucoes")
        raiz = Path(st.text_input("Diretorio de resultados", value="runs"))
        run_dirs = find_run_dirs([raiz]) if raiz.exists() else []
        nomes = {_nome_execucao(d, raiz): d for d in run_dirs}
        selecionados = st.multiselect("Execucoes", options=list(nomes), default=list(nomes)[:4])

    if not run_dirs:
        st.info(f"Nenhum metrics.csv encontrado em `{raiz}`. Rode `python fedsiam.py run --config ...` primeiro.")
        return
    if not selecionados:
        st.info("Selecione ao menos uma execucao na barra lateral.")
        return

    registros, avisos = {}, []
    for nome in selecionados:
        d = nomes[nome]
        try:
            registros[nome] = carregar_execucao_cached(str(d), (d / "metrics.csv").stat().st_mtime)
        except FedSiamError as e:
            avisos.append(f"{nome}: {e}")
    if avisos:
        with st.expander("ℹ️ Avisos da leitura", expanded=False):
            for aviso in avisos:
                st.warning(aviso)
    if not registros:
        return

    # ==========================================================================
    # METRICAS PRINCIPAIS
    # ==========================================================================
    resumos = {n: summarize_metrics(r.metrics) for n, r in registros.items()}
    melhor_nome = max(resumos, key=lambda n: resumos[n][COL_BEST_ACC])
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        render_metric_card("Execucoes", f"{len(registros)}", "🗂️")
    with col2:
        render_metric_card("Melhor acuracia", f"{100 * resumos[melhor_nome][COL_BEST_ACC]:.2f}%", "🏆")
    with col3:
        render_metric_card("Acuracia final", f"{100 * resumos[melhor_nome][COL_FINAL_ACC]:.2f}%", "🎯")
    with col4:
        render_metric_card("Comunicacao", f"{resumos[melhor_nome][COL_COMM_TOTAL]:,}", "📡")
    st.caption(f"Cartoes referentes a execucao com melhor acuracia: {melhor_nome}")

    st.markdown("---")

    tab_curvas, tab_comm, tab_cmp, tab_fsm = st.tabs([
        f"📈 {TAB_CURVAS}",
        f"📡 {TAB_COMUNICACAO}",
        f"📊 {TAB_COMPARACAO}",
        f"🧬 {TAB_FSM}",
    ])

    with tab_curvas:
        st.markdown("#### Acuracia de teste por rodada")
        st.plotly_chart(criar_grafico_acuracia(registros), use_container_width=True)

    with tab_comm:
        col1, col2 = st.columns(2)
        with col1:
            st.markdown("#### Acuracia x escalares enviados")
            st.plotly_chart(criar_grafico_acuracia_comunicacao(registros), use_container_width=True)
        with col2:
            st.markdown("#### Total enviado por execucao")
            st.plotly_chart(criar_grafico_upload_total(registros), use_container_width=True)

    with tab_cmp:
        try:
            tabela = compare_runs(list(registros.values()))
        except FedSiamError as e:
            st.error(f"❌ {e}")
        else:
            st.markdown(f"Alvo de acuracia: **{100 * tabela.attrs['target_acc']:.2f}%**")
            st.dataframe(tabela, use_container_width=True, hide_index=True)
            botoes_download(tabela, "comparacao", comparison_sheets(tabela))

    with tab_fsm:
        com_fsm = {n: r for n, r in registros.items() if r.fsm_log is not None and not r.fsm_log.empty}
        if not com_fsm:
            st.info("Nenhuma execucao selecionada tem fsm_log.csv (variantes siamesas gravam o log).")
        else:
            nome = st.selectbox("Execucao", options=list(com_fsm))
            reg = com_fsm[nome]
            col1, col2 = st.columns([3, 2])
            with col1:
                st.markdown("#### FSM mediano por camada")
                st.plotly_chart(criar_grafico_fsm(reg.fsm_log), use_container_width=True)
            with col2:
                st.markdown("#### tau aplicado")
                st.plotly_chart(criar_grafico_tau(reg), use_container_width=True)
            pulos = reg.fsm_log.groupby(COL_LAYER, as_index=False)[COL_SKIPPED].mean()
            pulos[COL_SKIPPED] = (100 * pulos[COL_SKIPPED]).round(2)
            st.markdown("#### % de uploads pulados por camada")
            st.dataframe(pulos, use_container_width=True, hide_index=True)
            botoes_download(reg.fsm_log, "fsm_log")


# =============================================================================
# EXECUCAO
# =============================================================================
if __name__ == "__main__":
    main()
