"""
Classic pcap reading, writing and segmentation.
"""

import io
import logging
import struct
from typing import BinaryIO, Iterator, List, Sequence, Union

from probewatch.constants import (
    DEFAULT_SEGMENT_SIZE,
    GLOBAL_HEADER_LEN,
    LINKTYPE_ETHERNET,
    PCAP_MAGIC,
    PCAP_SNAPLEN,
    PCAP_VERSION_MAJOR,
    PCAP_VERSION_MINOR,
    RECORD_HEADER_LEN,
)
from probewatch.errors import ArgumentError, BadMagicError, TruncatedCaptureError
from probewatch.packet import CaptureSegment, PacketRecord, decode_frame, encode_frame
from probewatch.utils import Source, read_source

logger = logging.getLogger(__name__)

_GLOBAL_FMT = "IHHiIII"
_RECORD_FMT = "IIII"
_BYTEORDER = {"little": "<", "big": ">"}


class PcapReader:
    """
    Iterates the packets of a classic pcap stream.

    Frames that are not IPv4 TCP/UDP/ICMP, and every frame of a capture whose
    link type is not Ethernet, are skipped and counted in ``skipped``.

    Args:
        stream (BinaryIO): A binary stream positioned at the global header.

    Raises:
        BadMagicError: If the stream does not start with a pcap magic number.
        TruncatedCaptureError: If a header promises more bytes than remain.
    """

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self.skipped = 0
        self._read_global_header()

    def _read_global_header(self):
        head = self._stream.read(GLOBAL_HEADER_LEN)
        if len(head) < 4:
            raise BadMagicError("stream too short for a pcap magic number")
        if struct.unpack("<I", head[:4])[0] == PCAP_MAGIC:
            self._endian = "<"
        elif struct.unpack(">I", head[:4])[0] == PCAP_MAGIC:
            self._endian = ">"
        else:
            raise BadMagicError(f"bad pcap magic {head[:4].hex()}")
        if len(head) < GLOBAL_HEADER_LEN:
            raise TruncatedCaptureError("pcap global header is truncated")
        fields = struct.unpack(self._endian + _GLOBAL_FMT, head)
        self.version = (fields[1], fields[2])
        self.snaplen = fields[5]
        self.linktype = fields[6]
        if self.linktype != LINKTYPE_ETHERNET:
            logger.warning(
                "unsupported link type %d, every record is skipped", self.linktype
            )

    @property
    def byteorder(self) -> str:
        return "little" if self._endian == "<" else "big"

    def __iter__(self) -> Iterator[PacketRecord]:
        while True:
            header = self._stream.read(RECORD_HEADER_LEN)
            if not header:
                return
            if len(header) < RECORD_HEADER_LEN:
                raise TruncatedCaptureError("pcap record header is truncated")
            ts_sec, ts_usec, incl_len, orig_len = struct.unpack(
                self._endian + _RECORD_FMT, header
            )
            buf = self._stream.read(incl_len)
            if len(buf) < incl_len:
                raise TruncatedCaptureError(
                    f"record promises {incl_len} bytes, {len(buf)} remain"
                )
            if self.linktype != LINKTYPE_ETHERNET:
                self.skipped += 1
                continue
            packet = decode_frame(buf, ts_sec, ts_usec, orig_len)
            if packet is None:
                self.skipped += 1
                continue
            yield packet


def read_pcap(source: Union[Source, BinaryIO]) -> List[PacketRecord]:
    """
    Reads every supported packet of a classic pcap capture.

    Args:
        source: Raw bytes, a path, a URL or a binary handle.

    Returns:
        List[PacketRecord]: Packets in file order.
    """
    reader = PcapReader(io.BytesIO(read_source(source)))
    packets = list(reader)
    if reader.skipped:
        logger.warning("skipped %d unsupported records", reader.skipped)
    logger.debug("read %d packets", len(packets))
    return packets


def write_pcap(packets: Sequence[PacketRecord], byteorder: str = "little") -> bytes:
    """
    Writes packets as a classic pcap capture with Ethernet link type.

    Every packet is validated before any byte is produced.

    Args:
        packets (Sequence[PacketRecord]): Packets to write.
        byteorder (str, optional): ``"little"`` or ``"big"``. Defaults to "little".

    Returns:
        bytes: The capture.

    Raises:
        InvalidPacketError: If a packet violates its invariants.
    """
    endian = _BYTEORDER[byteorder]
    for packet in packets:
        packet.validate()
    out = io.BytesIO()
    out.write(
        struct.pack(
            endian + _GLOBAL_FMT,
            PCAP_MAGIC,
            PCAP_VERSION_MAJOR,
            PCAP_VERSION_MINOR,
            0,
            0,
            PCAP_SNAPLEN,
            LINKTYPE_ETHERNET,
        )
    )
    for packet in packets:
        frame = encode_frame(packet)
        out.write(
            struct.pack(
                endian + _RECORD_FMT,
                packet.ts_sec,
                packet.ts_usec,
                len(frame),
                packet.wire_len,
            )
        )
        out.write(frame)
    return out.getvalue()


def segment(
    packets: Sequence[PacketRecord], n: int = DEFAULT_SEGMENT_SIZE
) -> List[CaptureSegment]:
    """
    Cuts a packet sequence into consecutive segments of ``n`` packets.

    Args:
        packets (Sequence[PacketRecord]): The packets.
        n (int, optional): Segment size. Defaults to 2,000,000.

    Returns:
        List[CaptureSegment]: Segments, all of size ``n`` except possibly the last.
    """
    if n < 1:
        raise ArgumentError(f"segment size must be >= 1, got {n}")
    return [
        CaptureSegment(packets=list(packets[start : start + n]), index=i)
        for i, start in enumerate(range(0, len(packets), n))
    ]
