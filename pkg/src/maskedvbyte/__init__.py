"""VByte integer compression with a masked, table-driven vectorized decoder."""

from .vector import (
    PrefixState,
    decode,
    decode_delta_stream,
    decode_from,
    decode_stream,
    decode_window,
    native_available,
    prefix_sum2,
    prefix_sum4,
    resolve_path,
)
from .format import (
    EncodedBuffer,
    MalformedStreamError,
    TruncatedStreamError,
    VByteError,
    decode_scalar,
    delta_encode,
    encode_one,
    encode_sequence,
    is_canonical,
    prefix_sum_scalar,
)
from .storage import ListFileError, read_list, write_list
from .tables import (
    CaseKind,
    DecodeCase,
    build_entry_table,
    build_shuffle_table,
    case_index,
    classify_mask,
    extract_mask,
)

__version__ = "0.1.0"
