"""Atomic memory operations usable inside compiled (nogil) kernels.

Each helper operates on one element of a 1-d contiguous array. They lower to
single LLVM atomic instructions, so kernels built on them can be safely run
from several Python threads at once.
"""
from numba import types
from numba.core import cgutils
from numba.core.errors import TypingError
from numba.extending import intrinsic

__all__ = [
    "cas_i8", "add_i8", "xchg_i8", "load_i8", "load_i8_sc", "store_i8",
    "fadd_f8", "load_f8", "store_f8",
]


def _elem_ptr(context, builder, arrty, arr, idx):
    ary = context.make_array(arrty)(context, builder, arr)
    return cgutils.get_item_pointer(context, builder, arrty, ary, (idx,))


def _check(arr, dtype, name):
    if not (isinstance(arr, types.Array) and arr.dtype == dtype and arr.ndim == 1):
        raise TypingError(f"{name} expects a 1-d {dtype} array, got {arr}")


@intrinsic
def cas_i8(typingctx, arr, idx, expected, new):
    """Compare-and-swap arr[idx]: if == expected, set to new. Returns the old value."""
    _check(arr, types.int64, "cas_i8")
    sig = types.int64(arr, types.int64, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        pair = builder.cmpxchg(
            _elem_ptr(context, builder, signature.args[0], args[0], args[1]),
            args[2], args[3], ordering="seq_cst", failordering="seq_cst")
        return builder.extract_value(pair, 0)

    return sig, codegen


@intrinsic
def add_i8(typingctx, arr, idx, val):
    """Atomic arr[idx] += val. Returns the old value."""
    _check(arr, types.int64, "add_i8")
    sig = types.int64(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("add", ptr, args[2], ordering="seq_cst")

    return sig, codegen


@intrinsic
def xchg_i8(typingctx, arr, idx, val):
    """Atomic swap: arr[idx] = val. Returns the old value."""
    _check(arr, types.int64, "xchg_i8")
    sig = types.int64(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("xchg", ptr, args[2], ordering="seq_cst")

    return sig, codegen


@intrinsic
def load_i8(typingctx, arr, idx):
    """Atomic (acquire) load of arr[idx]."""
    _check(arr, types.int64, "load_i8")
    sig = types.int64(arr, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, ordering="acquire", align=8)

    return sig, codegen


@intrinsic
def load_i8_sc(typingctx, arr, idx):
    """Sequentially consistent load of arr[idx].

    Used as the closing read of version-counter read sections, where plain
    data loads must not be reordered past the check.
    """
    _check(arr, types.int64, "load_i8_sc")
    sig = types.int64(arr, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, ordering="seq_cst", align=8)

    return sig, codegen


@intrinsic
def store_i8(typingctx, arr, idx, val):
    """Atomic (release) store arr[idx] = val."""
    _check(arr, types.int64, "store_i8")
    sig = types.void(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, ordering="release", align=8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def fadd_f8(typingctx, arr, idx, val):
    """Atomic arr[idx] += val on float64. Returns the old value."""
    _check(arr, types.float64, "fadd_f8")
    sig = types.float64(arr, types.int64, types.float64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("fadd", ptr, args[2], ordering="seq_cst")

    return sig, codegen


@intrinsic
def load_f8(typingctx, arr, idx):
    """Atomic (acquire) load of a float64 element."""
    _check(arr, types.float64, "load_f8")
    sig = types.float64(arr, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, ordering="acquire", align=8)

    return sig, codegen


@intrinsic
def store_f8(typingctx, arr, idx, val):
    """Atomic (release) store of a float64 element."""
    _check(arr, types.float64, "store_f8")
    sig = types.void(arr, types.int64, types.float64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, ordering="release", align=8)
        return context.get_dummy_value()

    return sig, codegen
