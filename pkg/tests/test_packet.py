import unittest
from dataclasses import replace

from probewatch.constants import TCP_OPT_MSS, TCP_OPT_WSCALE, Protocol, TCPFlag
from probewatch.errors import InvalidPacketError
from probewatch.packet import build_packet, decode_frame, encode_frame


class TestBuildPacket(unittest.TestCase):
    def test_minimum_frame_size(self):
        packet = build_packet(
            1_500_000,
            "10.0.0.1",
            "10.0.0.2",
            1234,
            80,
            Protocol.TCP,
            tcp_flags=TCPFlag.SYN,
        )
        self.assertEqual(packet.wire_len, 60)
        self.assertEqual(packet.ts_sec, 1)
        self.assertEqual(packet.ts_usec, 500_000)
        self.assertEqual(packet.ts_us, 1_500_000)

    def test_wire_len_grows_with_payload(self):
        packet = build_packet(
            0, "10.0.0.1", "10.0.0.2", 53000, 53, Protocol.UDP, payload_len=100
        )
        self.assertEqual(packet.wire_len, 14 + 20 + 8 + 100)

    def test_tcp_options_are_padded(self):
        packet = build_packet(
            0,
            "10.0.0.1",
            "10.0.0.2",
            1234,
            80,
            Protocol.TCP,
            tcp_flags=TCPFlag.SYN,
            tcp_options=((TCP_OPT_MSS, 1460), (TCP_OPT_WSCALE, 7)),
        )
        self.assertEqual(packet.header_len(), 14 + 20 + 20 + 8)
        self.assertEqual(packet.option(TCP_OPT_MSS), 1460)
        self.assertEqual(packet.option(TCP_OPT_WSCALE), 7)

    def test_option_absent(self):
        packet = build_packet(0, "10.0.0.1", "10.0.0.2", 1234, 80, Protocol.TCP)
        self.assertIsNone(packet.option(TCP_OPT_MSS))


class TestValidate(unittest.TestCase):
    def setUp(self):
        self.packet = build_packet(
            0, "10.0.0.1", "10.0.0.2", 1234, 80, Protocol.TCP, tcp_flags=TCPFlag.SYN
        )

    def test_valid_packet_returns_self(self):
        self.assertIs(self.packet.validate(), self.packet)

    def test_bad_address(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, src_ip="not-an-ip").validate()

    def test_port_out_of_range(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, dst_port=70000).validate()

    def test_port_must_be_int(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, dst_port=80.0).validate()

    def test_icmp_with_ports(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, proto=Protocol.ICMP, tcp_flags=0).validate()

    def test_tcp_fields_on_udp(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, proto=Protocol.UDP).validate()

    def test_unsupported_option(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, tcp_options=((8, 1),)).validate()

    def test_payload_exceeds_frame(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, payload_len=100).validate()

    def test_unknown_protocol(self):
        with self.assertRaises(InvalidPacketError):
            replace(self.packet, proto=47).validate()


class TestFrameCodec(unittest.TestCase):
    def test_tcp_frame_round_trip(self):
        packet = build_packet(
            2_000_001,
            "192.168.1.10",
            "192.168.1.20",
            40000,
            443,
            Protocol.TCP,
            tcp_flags=int(TCPFlag.PSH | TCPFlag.ACK),
            ttl=128,
            seq=123456,
            window=29200,
            payload_len=517,
        )
        frame = encode_frame(packet)
        self.assertEqual(len(frame), packet.wire_len)
        decoded = decode_frame(frame, packet.ts_sec, packet.ts_usec, packet.wire_len)
        self.assertEqual(decoded, packet)

    def test_icmp_frame_round_trip(self):
        packet = build_packet(
            5, "10.0.0.1", "10.0.0.9", 0, 0, Protocol.ICMP, icmp_type=8, ttl=50
        )
        frame = encode_frame(packet)
        decoded = decode_frame(frame, packet.ts_sec, packet.ts_usec, packet.wire_len)
        self.assertEqual(decoded, packet)

    def test_non_ip_frame_is_none(self):
        arp = bytes(12) + b"\x08\x06" + bytes(46)
        self.assertIsNone(decode_frame(arp, 0, 0, 60))


if __name__ == "__main__":
    unittest.main()
