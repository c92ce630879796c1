import struct
import tempfile
import unittest
from io import BytesIO
from pathlib import Path
from unittest.mock import patch

from probewatch.capture import PcapReader, read_pcap, segment, write_pcap
from probewatch.constants import TCP_OPT_MSS, TCP_OPT_WSCALE, Protocol, TCPFlag
from probewatch.errors import BadMagicError, InvalidPacketError, TruncatedCaptureError
from probewatch.packet import build_packet


def sample_packets():
    return [
        build_packet(
            1_000_000,
            "10.0.0.1",
            "10.0.0.2",
            40000,
            80,
            Protocol.TCP,
            tcp_flags=int(TCPFlag.SYN),
            seq=1000,
            window=64240,
            tcp_options=((TCP_OPT_MSS, 1460), (TCP_OPT_WSCALE, 7)),
        ),
        build_packet(
            1_000_250,
            "10.0.0.2",
            "10.0.0.1",
            80,
            40000,
            Protocol.TCP,
            tcp_flags=int(TCPFlag.SYN | TCPFlag.ACK),
            seq=5000,
            window=65160,
            tcp_options=((TCP_OPT_MSS, 1400),),
        ),
        build_packet(
            1_200_000,
            "10.0.0.3",
            "10.0.0.53",
            53001,
            53,
            Protocol.UDP,
            payload_len=40,
            ttl=63,
        ),
        build_packet(
            1_300_000, "10.0.0.4", "10.0.0.5", 0, 0, Protocol.ICMP, icmp_type=8
        ),
        build_packet(
            1_300_900, "10.0.0.5", "10.0.0.4", 0, 0, Protocol.ICMP, icmp_type=0
        ),
    ]


def empty_capture() -> bytes:
    return struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)


class TestPcapRoundTrip(unittest.TestCase):
    def test_little_endian(self):
        packets = sample_packets()
        self.assertEqual(read_pcap(write_pcap(packets)), packets)

    def test_big_endian(self):
        packets = sample_packets()
        data = write_pcap(packets, byteorder="big")
        self.assertEqual(data[:4], b"\xa1\xb2\xc3\xd4")
        reader = PcapReader(BytesIO(data))
        self.assertEqual(reader.byteorder, "big")
        self.assertEqual(list(reader), packets)

    def test_deterministic_bytes(self):
        self.assertEqual(write_pcap(sample_packets()), write_pcap(sample_packets()))

    def test_write_validates_first(self):
        packets = sample_packets()
        bad = build_packet(0, "10.0.0.1", "10.0.0.2", 1, 2, Protocol.UDP)
        object.__setattr__(bad, "icmp_type", 3)
        with self.assertRaises(InvalidPacketError):
            write_pcap(packets + [bad])


class TestPcapReader(unittest.TestCase):
    def test_empty_capture(self):
        data = empty_capture()
        self.assertEqual(len(data), 24)
        self.assertEqual(read_pcap(data), [])

    def test_bad_magic(self):
        with self.assertRaises(BadMagicError):
            read_pcap(b"\x0a\x0d\x0d\x0a" + bytes(20))

    def test_too_short_for_magic(self):
        with self.assertRaises(BadMagicError):
            read_pcap(b"\xd4\xc3")

    def test_truncated_global_header(self):
        with self.assertRaises(TruncatedCaptureError):
            read_pcap(empty_capture()[:10])

    def test_truncated_record(self):
        data = write_pcap(sample_packets())
        with self.assertRaises(TruncatedCaptureError):
            read_pcap(data[:-5])

    def test_truncated_record_header(self):
        data = empty_capture() + bytes(8)
        with self.assertRaises(TruncatedCaptureError):
            read_pcap(data)

    def test_skips_non_ip_frames(self):
        arp = bytes(12) + b"\x08\x06" + bytes(46)
        data = empty_capture() + struct.pack("<IIII", 1, 0, len(arp), len(arp)) + arp
        data += write_pcap(sample_packets()[:1])[24:]
        reader = PcapReader(BytesIO(data))
        packets = list(reader)
        self.assertEqual(len(packets), 1)
        self.assertEqual(reader.skipped, 1)

    def test_skips_unsupported_link_type(self):
        data = struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 101)
        data += write_pcap(sample_packets())[24:]
        reader = PcapReader(BytesIO(data))
        self.assertEqual(list(reader), [])
        self.assertEqual(reader.skipped, 5)

    def test_read_from_path(self):
        packets = sample_packets()
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "capture.pcap"
            path.write_bytes(write_pcap(packets))
            self.assertEqual(read_pcap(str(path)), packets)
            self.assertEqual(read_pcap(path), packets)

    @patch("requests.get")
    def test_read_from_url(self, mock_get):
        url = "https://example.com/capture.pcap"
        mock_get.return_value.content = write_pcap(sample_packets())
        packets = read_pcap(url)
        mock_get.assert_called_once_with(url, timeout=60)
        self.assertEqual(packets, sample_packets())


class TestSegment(unittest.TestCase):
    def test_sizes(self):
        packets = sample_packets()
        segments = segment(packets, 2)
        self.assertEqual([len(s) for s in segments], [2, 2, 1])
        self.assertEqual([s.index for s in segments], [0, 1, 2])
        self.assertEqual([p for s in segments for p in s.packets], packets)

    def test_single_segment(self):
        segments = segment(sample_packets())
        self.assertEqual(len(segments), 1)

    def test_empty(self):
        self.assertEqual(segment([], 3), [])

    def test_invalid_size(self):
        with self.assertRaises(ValueError):
            segment(sample_packets(), 0)


if __name__ == "__main__":
    unittest.main()
