"""
Fluxos aleatórios determinísticos baseados em contador (Philox).

Cada teste de permutação recebe uma chave de 128 bits derivada da seed mestre
e da identidade do teste (fonte, expressão, atributo, par de grupos). Cada bloco
de permutações usa o mesmo key com o índice do bloco na palavra alta do contador
e depende só de (key, bloco): a ordem em que os blocos são calculados, ou sua
divisão entre workers, não muda as permutações sorteadas.

Decisão técnica: numpy.random.Philox é o gerador counter-based oficial do numpy;
a derivação da chave usa blake2b para espalhar strings arbitrárias em 128 bits.
"""

import hashlib

import numpy as np

# O bloco ocupa a palavra mais alta do contador de 256 bits do Philox;
# cada bloco dispõe de 2**192 incrementos antes de colidir com o próximo.
_BLOCK_SHIFT = 192
_SEED_MASK = (1 << 64) - 1


def stream_key(seed: int, *parts: str) -> int:
    """
    Deriva a chave Philox (inteiro < 2**128) de (seed, partes da identidade do teste).

    A seed é tratada como inteiro de 64 bits sem sinal.
    """
    if seed < 0 or seed > _SEED_MASK:
        raise ValueError(f"Seed fora do intervalo de 64 bits: {seed}")
    h = hashlib.blake2b(digest_size=16)
    h.update(seed.to_bytes(8, "little"))
    for part in parts:
        encoded = part.encode("utf-8")
        # Prefixo de tamanho evita colisões do tipo ("ab","c") vs ("a","bc")
        h.update(len(encoded).to_bytes(4, "little"))
        h.update(encoded)
    return int.from_bytes(h.digest(), "little")


def block_generator(key: int, block_index: int) -> np.random.Generator:
    """Gerador independente para o bloco `block_index` do fluxo `key`."""
    if block_index < 0:
        raise ValueError("block_index deve ser não negativo.")
    bit_gen = np.random.Philox(key=key, counter=block_index << _BLOCK_SHIFT)
    return np.random.Generator(bit_gen)


def scenario_generator(seed: int, label: str) -> np.random.Generator:
    """Gerador de um cenário sintético (um único fluxo por cenário)."""
    return block_generator(stream_key(seed, "scenario", label), 0)
