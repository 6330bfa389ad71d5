"""Numeric kernels for collapsed Gibbs sampling.

All kernels are deterministic: randomness comes in as pre-drawn uniform
arrays (one value per token update) generated by the caller, so the same
uniforms always reproduce the same sweep. JIT-compiled via numba; the
plain-Python definitions remain usable (slowly) if compilation is
unavailable.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True, nogil=True)
def lda_sweep(z, doc_of, word_of, ndk, nkw, nk, alpha, beta, uniforms):
    """One full collapsed-Gibbs sweep with a symmetric term prior.

    For each token i (in order), removes it from the count tables, samples
    a new topic from

        p(k) ~ (ndk[d,k] + alpha) * (nkw[k,w] + beta) / (nk[k] + V*beta)

    using uniforms[i], and adds it back.
    """
    n_tokens = z.shape[0]
    n_topics = nkw.shape[0]
    v_beta = nkw.shape[1] * beta
    for i in range(n_tokens):
        d = doc_of[i]
        w = word_of[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1

        total = 0.0
        for kk in range(n_topics):
            total += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta) / (nk[kk] + v_beta)
        r = uniforms[i] * total
        acc = 0.0
        k_new = n_topics - 1
        for kk in range(n_topics):
            acc += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta) / (nk[kk] + v_beta)
            if acc > r:
                k_new = kk
                break

        z[i] = k_new
        ndk[d, k_new] += 1
        nkw[k_new, w] += 1
        nk[k_new] += 1


@njit(cache=True, nogil=True)
def lda_sweep_asym(z, doc_of, word_of, ndk, nkw, nk, alpha, beta_kw, beta_ksum, uniforms):
    """Sweep variant with per-(topic, term) pseudo-count priors."""
    n_tokens = z.shape[0]
    n_topics = nkw.shape[0]
    for i in range(n_tokens):
        d = doc_of[i]
        w = word_of[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1

        total = 0.0
        for kk in range(n_topics):
            total += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta_kw[kk, w]) / (nk[kk] + beta_ksum[kk])
        r = uniforms[i] * total
        acc = 0.0
        k_new = n_topics - 1
        for kk in range(n_topics):
            acc += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta_kw[kk, w]) / (nk[kk] + beta_ksum[kk])
            if acc > r:
                k_new = kk
                break

        z[i] = k_new
        ndk[d, k_new] += 1
        nkw[k_new, w] += 1
        nk[k_new] += 1


@njit(cache=True, nogil=True)
def joint_log_likelihood(ndk, nkw, nk, nd, alpha, beta):
    """Collapsed joint log p(w, z) including all constant terms."""
    n_docs, n_topics = ndk.shape
    n_terms = nkw.shape[1]
    ll = 0.0
    lg_alpha = math.lgamma(alpha)
    lg_kalpha = math.lgamma(n_topics * alpha)
    for d in range(n_docs):
        ll += lg_kalpha - math.lgamma(nd[d] + n_topics * alpha)
        for k in range(n_topics):
            ll += math.lgamma(ndk[d, k] + alpha) - lg_alpha
    lg_beta = math.lgamma(beta)
    lg_vbeta = math.lgamma(n_terms * beta)
    for k in range(n_topics):
        ll += lg_vbeta - math.lgamma(nk[k] + n_terms * beta)
        for w in range(n_terms):
            ll += math.lgamma(nkw[k, w] + beta) - lg_beta
    return ll


@njit(cache=True, nogil=True)
def foldin_sweep(zf, doc_of, word_of, ndk, phi, alpha, uniforms):
    """One Gibbs pass over fold-in tokens with the topic-term matrix frozen:
    p(k) ~ phi[k, w] * (ndk[d, k] + alpha)."""
    n_tokens = zf.shape[0]
    n_topics = phi.shape[0]
    for i in range(n_tokens):
        d = doc_of[i]
        w = word_of[i]
        k = zf[i]
        ndk[d, k] -= 1

        total = 0.0
        for kk in range(n_topics):
            total += phi[kk, w] * (ndk[d, kk] + alpha)
        r = uniforms[i] * total
        acc = 0.0
        k_new = n_topics - 1
        for kk in range(n_topics):
            acc += phi[kk, w] * (ndk[d, kk] + alpha)
            if acc > r:
                k_new = kk
                break

        zf[i] = k_new
        ndk[d, k_new] += 1


@njit(cache=True, nogil=True)
def init_assignments_weighted(word_of, phi_prev, uniforms):
    """Draw initial topics with p(k) ~ phi_prev[k, w] per token."""
    n_tokens = word_of.shape[0]
    n_topics = phi_prev.shape[0]
    z = np.empty(n_tokens, dtype=np.int32)
    for i in range(n_tokens):
        w = word_of[i]
        total = 0.0
        for kk in range(n_topics):
            total += phi_prev[kk, w]
        r = uniforms[i] * total
        acc = 0.0
        k_new = n_topics - 1
        for kk in range(n_topics):
            acc += phi_prev[kk, w]
            if acc > r:
                k_new = kk
                break
        z[i] = k_new
    return z
