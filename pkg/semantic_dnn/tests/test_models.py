import torch

from semantic_dnn import (
    ChannelDecoder,
    ChannelEncoder,
    Classifier,
    SemanticEncoder,
    awgn,
    binary_quantize,
)


def test_quantizer_forward_is_binary():
    torch.manual_seed(0)
    x = torch.randn(64, 13)
    u = binary_quantize(x)
    assert set(u.unique().tolist()) <= {0.0, 1.0}
    assert torch.equal(u, (x > 0).float())


def test_quantizer_backward_is_identity():
    torch.manual_seed(1)
    z = torch.randn(8, 5, requires_grad=True)
    head = torch.nn.Linear(5, 3)
    u = binary_quantize(z)
    loss = head(u).square().sum()
    grad_z, grad_u = torch.autograd.grad(loss, (z, u))
    assert torch.equal(grad_z, grad_u)


def test_encoder_shapes_and_eval_determinism():
    torch.manual_seed(2)
    enc = SemanticEncoder(k=7)
    enc.eval()
    x = torch.rand(10, 784)
    z = enc(x)
    assert z.shape == (10, 7)
    assert torch.equal(z, enc(x))


def test_classifier_and_codec_shapes():
    cls = Classifier(6)
    cenc = ChannelEncoder(6, 32)
    cdec = ChannelDecoder(32, 6)
    u = torch.randint(0, 2, (4, 6)).float()
    assert cls(u).shape == (4, 10)
    x = cenc(u).detach()
    assert x.shape == (4, 32)
    assert float(x.abs().max()) <= 1.0
    assert cdec(x).shape == (4, 6)


def test_awgn_power_and_determinism():
    gen = torch.Generator().manual_seed(5)
    x = torch.zeros(2000, 100)
    y = awgn(x, 0.63, gen)
    power = float(y.square().mean())
    assert abs(power - 0.63) < 0.02
    gen2 = torch.Generator().manual_seed(5)
    assert torch.equal(awgn(x, 0.63, gen2), y)
    assert awgn(x, 0.0, gen) is x
