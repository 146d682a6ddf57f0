"""
Camada de persistência: leitura e escrita de conjuntos de dados em disco.

O Repository isola completamente o acesso a arquivos do resto da aplicação.
Nenhuma lógica estatística aqui, apenas parsing, validação de formato e escrita.

Formatos suportados:
    Binário de embeddings:
        "FEBE" | u32 versão (=1) | u32 n | u32 d | u32 tamanho do bloco de rótulos
        | bloco de rótulos UTF-8 (CSV: id + uma coluna por chave de rótulo)
        | payload n×d float32 little-endian, row-major
    CSV de embeddings:   id,<chaves de rótulo…>,v0..v{d-1}
    CSV de predições:    id,true,pred[,<colunas de atributo…>]
    Vocabulário/esquema: um nome por linha, ordem significativa

Decisão técnica:
- Valores sempre promovidos para float64 na carga (payloads float32 são alargados)
- Vetor de norma zero é erro fatal: descartar amostras mudaria tamanhos de grupo
  e, portanto, as distribuições de permutação
- Rótulos são strings exatas (case-sensitive), sem correspondência aproximada
"""

import csv
import hashlib
import io
import struct
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app.core.exceptions import DataValidationError
from app.models.schemas import AttributeSchema, EmbeddingSet, FileFormat, PredictionSet
from app.utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"FEBE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_PAYLOAD_DTYPE = np.dtype("<f4")
PREDICTION_COLUMNS = ("id", "true", "pred")


def _first_error(exc: ValidationError) -> str:
    """Mensagem legível do primeiro erro de validação do pydantic."""
    err = exc.errors()[0]
    return str(err.get("ctx", {}).get("error") or err["msg"])


def _read_name_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise FileNotFoundError(f"Arquivo não encontrado: {path}")
    names = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            names.append(line)
    return names


class DatasetRepository:
    """
    Repositório de embeddings, logs de predição e arquivos de vocabulário.

    Classe sem estado: pode ser instanciada diretamente em qualquer serviço
    ou substituída por um dublê nos testes.
    """

    # =========================================================================
    # EMBEDDINGS
    # =========================================================================

    def load_embeddings(
        self,
        path: str | Path,
        fmt: FileFormat = FileFormat.BINARY,
        required_labels: Sequence[str] = (),
    ) -> EmbeddingSet:
        """
        Carrega e valida um EmbeddingSet. Ordem das linhas preservada do arquivo.

        Erros (DataValidationError): dimensão incompatível entre cabeçalho e linhas,
        valor não finito, vetor de norma zero (com o id da amostra), coluna de
        rótulo ausente, payload truncado.
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Arquivo de embeddings não encontrado: {path}")

        if FileFormat(fmt) is FileFormat.BINARY:
            ids, labels, vectors, dim = self._parse_binary(path)
        else:
            ids, labels, vectors, dim = self._parse_csv(path)

        missing = [key for key in required_labels if key not in labels]
        if missing:
            raise DataValidationError(f"{path}: coluna(s) de rótulo ausente(s): {missing}")

        duplicated = _first_duplicate(ids)
        if duplicated is not None:
            raise DataValidationError(f"{path}: id duplicado '{duplicated}'.")

        try:
            result = EmbeddingSet(ids=tuple(ids), dim=dim, vectors=vectors, labels=labels)
        except ValidationError as exc:
            raise DataValidationError(f"{path}: {_first_error(exc)}") from exc

        logger.info(f"Embeddings carregados | path={path} | n={result.n} | dim={dim}")
        return result

    def _parse_binary(self, path: Path) -> tuple[list[str], dict[str, tuple[str, ...]], np.ndarray, int]:
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise DataValidationError(f"{path}: cabeçalho truncado.")
        magic, version, n, d, label_len = _HEADER.unpack_from(raw, 0)
        if magic != MAGIC:
            raise DataValidationError(f"{path}: magic inválido {magic!r} (esperado {MAGIC!r}).")
        if version != FORMAT_VERSION:
            raise DataValidationError(f"{path}: versão de formato não suportada ({version}).")
        if d == 0:
            raise DataValidationError(f"{path}: dimensão zero no cabeçalho.")

        label_start = _HEADER.size
        payload_start = label_start + label_len
        expected = payload_start + n * d * _PAYLOAD_DTYPE.itemsize
        if len(raw) != expected:
            raise DataValidationError(
                f"{path}: payload size mismatch (esperado {expected} bytes para "
                f"n={n}, d={d}; arquivo tem {len(raw)})."
            )

        try:
            block = raw[label_start:payload_start].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataValidationError(f"{path}: bloco de rótulos não é UTF-8 válido.") from exc
        rows = list(csv.reader(io.StringIO(block)))
        if not rows or not rows[0] or rows[0][0] != "id":
            raise DataValidationError(f"{path}: bloco de rótulos sem cabeçalho 'id,...'.")
        header, body = rows[0], rows[1:]
        if len(body) != n:
            raise DataValidationError(
                f"{path}: bloco de rótulos com {len(body)} linhas para n={n} amostras."
            )
        ids, labels = self._split_label_rows(path, header, body)

        vectors = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE, count=n * d, offset=payload_start)
        vectors = vectors.reshape(n, d).astype(np.float64)
        return ids, labels, vectors, d

    def _parse_csv(self, path: Path) -> tuple[list[str], dict[str, tuple[str, ...]], np.ndarray, int]:
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataValidationError(f"{path}: arquivo vazio.")
            rows = list(reader)

        if not header or header[0] != "id":
            raise DataValidationError(f"{path}: a primeira coluna deve ser 'id'.")
        try:
            first_vec = header.index("v0")
        except ValueError:
            raise DataValidationError(f"{path}: cabeçalho sem coluna 'v0'.")
        vec_cols = header[first_vec:]
        if vec_cols != [f"v{i}" for i in range(len(vec_cols))]:
            raise DataValidationError(f"{path}: colunas de vetor devem ser v0..v{{d-1}} contíguas.")
        dim = len(vec_cols)
        label_header = header[:first_vec]

        label_rows, values = [], np.empty((len(rows), dim), dtype=np.float64)
        for i, row in enumerate(rows):
            sample = row[0] if row else f"<linha {i + 2}>"
            if len(row) != len(header):
                raise DataValidationError(
                    f"{path}: dimension mismatch na amostra '{sample}' "
                    f"({len(row)} campos, cabeçalho tem {len(header)})."
                )
            try:
                values[i] = np.asarray(row[first_vec:], dtype=np.float64)
            except ValueError as exc:
                raise DataValidationError(f"{path}: valor não numérico na amostra '{sample}'.") from exc
            label_rows.append(row[:first_vec])

        ids, labels = self._split_label_rows(path, label_header, label_rows)
        return ids, labels, values, dim

    @staticmethod
    def _split_label_rows(
        path: Path, header: list[str], rows: list[list[str]]
    ) -> tuple[list[str], dict[str, tuple[str, ...]]]:
        keys = header[1:]
        if len(set(keys)) != len(keys):
            raise DataValidationError(f"{path}: chaves de rótulo repetidas no cabeçalho.")
        ids: list[str] = []
        columns: dict[str, list[str]] = {k: [] for k in keys}
        for row in rows:
            if len(row) != len(header):
                raise DataValidationError(f"{path}: linha de rótulos com {len(row)} campos: {row[:1]}")
            ids.append(row[0])
            for key, value in zip(keys, row[1:]):
                if value == "":
                    raise DataValidationError(f"{path}: rótulo '{key}' ausente na amostra '{row[0]}'.")
                columns[key].append(value)
        return ids, {k: tuple(v) for k, v in columns.items()}

    def write_embeddings(self, emb: EmbeddingSet, path: str | Path, fmt: FileFormat = FileFormat.BINARY) -> Path:
        """
        Escreve um EmbeddingSet no formato pedido.

        O binário é determinístico: carregar e reescrever um arquivo canônico
        reproduz os mesmos bytes (payload volta a float32).
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        keys = list(emb.labels)

        if FileFormat(fmt) is FileFormat.BINARY:
            block = io.StringIO()
            writer = csv.writer(block, lineterminator="\n")
            writer.writerow(["id", *keys])
            for i, sample_id in enumerate(emb.ids):
                writer.writerow([sample_id, *(emb.labels[k][i] for k in keys)])
            label_bytes = block.getvalue().encode("utf-8")
            header = _HEADER.pack(MAGIC, FORMAT_VERSION, emb.n, emb.dim, len(label_bytes))
            payload = np.ascontiguousarray(emb.vectors, dtype=_PAYLOAD_DTYPE).tobytes()
            path.write_bytes(header + label_bytes + payload)
        else:
            with path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["id", *keys, *(f"v{j}" for j in range(emb.dim))])
                for i, sample_id in enumerate(emb.ids):
                    writer.writerow(
                        [sample_id, *(emb.labels[k][i] for k in keys), *(repr(float(x)) for x in emb.vectors[i])]
                    )

        logger.info(f"Embeddings gravados | path={path} | n={emb.n} | formato={FileFormat(fmt).value}")
        return path

    # =========================================================================
    # PREDIÇÕES
    # =========================================================================

    def load_predictions(self, path: str | Path, class_vocabulary: Sequence[str]) -> PredictionSet:
        """
        Carrega um log de predições `id,true,pred[,atributos…]`.

        Células de atributo vazias são mantidas como "" (anotação ausente)
        e tratadas na estratificação. Erros: classe fora do vocabulário, id duplicado.
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Log de predições não encontrado: {path}")

        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataValidationError(f"{path}: arquivo vazio.")
            rows = list(reader)

        if tuple(header[:3]) != PREDICTION_COLUMNS:
            raise DataValidationError(f"{path}: cabeçalho deve começar com 'id,true,pred'.")
        attr_keys = header[3:]
        if len(set(attr_keys)) != len(attr_keys):
            raise DataValidationError(f"{path}: colunas de atributo repetidas.")

        ids, true_cls, pred_cls = [], [], []
        attrs: dict[str, list[str]] = {k: [] for k in attr_keys}
        for line_no, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataValidationError(f"{path}: linha {line_no} com {len(row)} campos.")
            ids.append(row[0])
            true_cls.append(row[1])
            pred_cls.append(row[2])
            for key, value in zip(attr_keys, row[3:]):
                attrs[key].append(value)

        try:
            preds = PredictionSet(
                ids=tuple(ids),
                true_class=tuple(true_cls),
                predicted_class=tuple(pred_cls),
                class_vocabulary=tuple(class_vocabulary),
                attribute_labels={k: tuple(v) for k, v in attrs.items()},
            )
        except ValidationError as exc:
            raise DataValidationError(f"{path}: {_first_error(exc)}") from exc

        logger.info(f"Predições carregadas | path={path} | n={preds.n} | atributos={attr_keys}")
        return preds

    def write_predictions(self, preds: PredictionSet, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        keys = list(preds.attribute_labels)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([*PREDICTION_COLUMNS, *keys])
            for i, sample_id in enumerate(preds.ids):
                writer.writerow(
                    [sample_id, preds.true_class[i], preds.predicted_class[i],
                     *(preds.attribute_labels[k][i] for k in keys)]
                )
        logger.info(f"Predições gravadas | path={path} | n={preds.n}")
        return path

    # =========================================================================
    # VOCABULÁRIOS, ESQUEMAS E LISTAS DE EXCLUSÃO
    # =========================================================================

    def load_vocabulary(self, path: str | Path) -> tuple[str, ...]:
        """Vocabulário de expressões: um nome por linha, ordem significativa."""
        path = Path(path)
        names = _read_name_lines(path)
        if not names:
            raise DataValidationError(f"{path}: vocabulário vazio.")
        duplicated = _first_duplicate(names)
        if duplicated is not None:
            raise DataValidationError(f"{path}: nome repetido '{duplicated}'.")
        return tuple(names)

    def load_schema(self, path: str | Path, name: Optional[str] = None) -> AttributeSchema:
        """Esquema de atributo: nome = stem do arquivo (ex: gender.txt → 'gender')."""
        path = Path(path)
        groups = _read_name_lines(path)
        try:
            return AttributeSchema(name=name or path.stem, groups=tuple(groups))
        except ValidationError as exc:
            raise DataValidationError(f"{path}: {_first_error(exc)}") from exc

    def write_names(self, names: Iterable[str], path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{n}\n" for n in names), encoding="utf-8")
        return path

    def load_exclusion_list(self, path: str | Path) -> frozenset[str]:
        """Lista de ids a excluir (amostras visualmente ambíguas): um id por linha."""
        ids = frozenset(_read_name_lines(Path(path)))
        logger.info(f"Lista de exclusão carregada | path={path} | ids={len(ids)}")
        return ids

    @staticmethod
    def file_digest(path: str | Path) -> str:
        """sha256 do arquivo de entrada (registrado no manifesto)."""
        h = hashlib.sha256()
        with Path(path).open("rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        return h.hexdigest()


def _first_duplicate(values: Iterable[str]) -> Optional[str]:
    seen: set[str] = set()
    for v in values:
        if v in seen:
            return v
        seen.add(v)
    return None
